/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_ratiocurve_free: (a: number, b: number) => void;
export const __wbg_tilt_free: (a: number, b: number) => void;
export const __wbg_traces_free: (a: number, b: number) => void;
export const ratioCurve: (a: number, b: number, c: bigint) => [number, number, number];
export const ratiocurve_exact: (a: number) => [number, number];
export const ratiocurve_logit: (a: number) => [number, number];
export const ratiocurve_maxGap: (a: number) => number;
export const ratiocurve_xs: (a: number) => [number, number];
export const tilt: (a: number, b: number, c: number, d: number, e: number, f: bigint) => [number, number, number];
export const tilt_exact: (a: number) => [number, number];
export const tilt_student: (a: number) => [number, number];
export const tilt_teacher: (a: number) => [number, number];
export const tilt_trained: (a: number) => [number, number];
export const tilt_trainedTv: (a: number) => number;
export const traces: (a: number, b: number, c: number, d: bigint) => [number, number, number];
export const traces_blocks: (a: number) => number;
export const traces_positions: (a: number) => [number, number];
export const traces_residual: (a: number) => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_start: () => void;
