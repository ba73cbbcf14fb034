/* tslint:disable */
/* eslint-disable */

export class Band {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    mean(): Float64Array;
    p10(): Float64Array;
    p90(): Float64Array;
    t(): Float64Array;
    /**
     * Iterations that blew up or failed.
     */
    readonly lost: number;
}

export class Comparison {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    circuit(): Float64Array;
    oracle(): Float64Array;
    t(): Float64Array;
    readonly max_deviation: number;
    readonly netlist: string;
}

export class Trace {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    t(): Float64Array;
    y(): Float64Array;
    readonly passivity_steps: number;
    /**
     * Time at which the run left the representable range, if it did.
     */
    readonly truncated_at: number | undefined;
}

/**
 * Compile an equation spec, simulate the circuit and solve the equation
 * directly on the same grid.
 */
export function compare_with_oracle(spec_text: string, dt: number, t_end: number): Comparison;

/**
 * Simulate a netlist and return its output node.
 */
export function simulate_netlist(text: string, dt: number, t_end: number): Trace;

/**
 * Mean and 10th/90th percentile relative error under component tolerance.
 */
export function stability_band(text: string, tolerance: number, iterations: number, seed: number, dt: number, t_end: number): Band;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_band_free: (a: number, b: number) => void;
    readonly __wbg_comparison_free: (a: number, b: number) => void;
    readonly __wbg_trace_free: (a: number, b: number) => void;
    readonly band_lost: (a: number) => number;
    readonly band_mean: (a: number) => [number, number];
    readonly band_p10: (a: number) => [number, number];
    readonly band_p90: (a: number) => [number, number];
    readonly band_t: (a: number) => [number, number];
    readonly compare_with_oracle: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly comparison_circuit: (a: number) => [number, number];
    readonly comparison_max_deviation: (a: number) => number;
    readonly comparison_netlist: (a: number) => [number, number];
    readonly comparison_oracle: (a: number) => [number, number];
    readonly comparison_t: (a: number) => [number, number];
    readonly simulate_netlist: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly stability_band: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly trace_passivity_steps: (a: number) => number;
    readonly trace_t: (a: number) => [number, number];
    readonly trace_truncated_at: (a: number) => [number, number];
    readonly trace_y: (a: number) => [number, number];
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
