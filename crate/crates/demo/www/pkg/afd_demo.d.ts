/* tslint:disable */
/* eslint-disable */

export class RatioCurve {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly exact: Float64Array;
    readonly logit: Float64Array;
    readonly maxGap: number;
    readonly xs: Float64Array;
}

export class Tilt {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly exact: Float64Array;
    readonly student: Float64Array;
    readonly teacher: Float64Array;
    readonly trainedTv: number;
    readonly trained: Float64Array;
}

export class Traces {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly blocks: number;
    readonly positions: Float64Array;
    readonly residual: number;
}

export function ratioCurve(shift: number, steps: number, seed: bigint): RatioCurve;

export function tilt(student: Float64Array, teacher: Float64Array, steps: number, seed: bigint): Tilt;

export function traces(prompt: number, frequency_scale: number, n: number, seed: bigint): Traces;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_ratiocurve_free: (a: number, b: number) => void;
    readonly __wbg_tilt_free: (a: number, b: number) => void;
    readonly __wbg_traces_free: (a: number, b: number) => void;
    readonly ratioCurve: (a: number, b: number, c: bigint) => [number, number, number];
    readonly ratiocurve_exact: (a: number) => [number, number];
    readonly ratiocurve_logit: (a: number) => [number, number];
    readonly ratiocurve_maxGap: (a: number) => number;
    readonly ratiocurve_xs: (a: number) => [number, number];
    readonly tilt: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
    readonly tilt_exact: (a: number) => [number, number];
    readonly tilt_student: (a: number) => [number, number];
    readonly tilt_teacher: (a: number) => [number, number];
    readonly tilt_trained: (a: number) => [number, number];
    readonly tilt_trainedTv: (a: number) => number;
    readonly traces: (a: number, b: number, c: number, d: bigint) => [number, number, number];
    readonly traces_blocks: (a: number) => number;
    readonly traces_positions: (a: number) => [number, number];
    readonly traces_residual: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
