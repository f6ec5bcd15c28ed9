/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_recovery_free: (a: number, b: number) => void;
export const recovery_report: (a: number) => [number, number];
export const recovery_svg: (a: number) => [number, number];
export const renderDecomposition: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const renderHeatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
export const solveDemo: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
