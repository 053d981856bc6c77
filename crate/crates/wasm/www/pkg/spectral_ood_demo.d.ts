/* tslint:disable */
/* eslint-disable */

/**
 * Closed-form and numeric quantities for one toy setting.
 */
export function exploreToy(variant: string, alpha_prime: number, beta_prime: number): string;

/**
 * Loss trace of the gradient factorizer next to the spectral optimum.
 */
export function factorizeTrace(variant: string, alpha_prime: number, beta_prime: number, k: number, seed: number): string;

/**
 * Probing error and separability gaps over a square grid.
 */
export function sweepMap(variant: string, lo: number, hi: number, resolution: number): string;

export function toyRank(): number;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly exploreToy: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly factorizeTrace: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly sweepMap: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly toyRank: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
