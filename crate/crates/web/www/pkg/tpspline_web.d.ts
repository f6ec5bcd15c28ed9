/* tslint:disable */
/* eslint-disable */

/**
 * Heatmap of a recovered spline plus its certificate lines.
 */
export class Recovery {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly report: string;
    readonly svg: string;
}

export function renderDecomposition(kind: string, seed: number, resolution: number): string;

export function renderHeatmap(kind: string, seed: number, resolution: number): string;

export function solveDemo(kind: string, m: number, seed: number, resolution: number): Recovery;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_recovery_free: (a: number, b: number) => void;
    readonly recovery_report: (a: number) => [number, number];
    readonly recovery_svg: (a: number) => [number, number];
    readonly renderDecomposition: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly renderHeatmap: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly solveDemo: (a: number, b: number, c: number, d: number, e: number) => [number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
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
