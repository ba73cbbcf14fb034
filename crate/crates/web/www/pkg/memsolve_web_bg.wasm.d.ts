/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_band_free: (a: number, b: number) => void;
export const __wbg_comparison_free: (a: number, b: number) => void;
export const __wbg_trace_free: (a: number, b: number) => void;
export const band_lost: (a: number) => number;
export const band_mean: (a: number) => [number, number];
export const band_p10: (a: number) => [number, number];
export const band_p90: (a: number) => [number, number];
export const band_t: (a: number) => [number, number];
export const compare_with_oracle: (a: number, b: number, c: number, d: number) => [number, number, number];
export const comparison_circuit: (a: number) => [number, number];
export const comparison_max_deviation: (a: number) => number;
export const comparison_netlist: (a: number) => [number, number];
export const comparison_oracle: (a: number) => [number, number];
export const comparison_t: (a: number) => [number, number];
export const simulate_netlist: (a: number, b: number, c: number, d: number) => [number, number, number];
export const stability_band: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const trace_passivity_steps: (a: number) => number;
export const trace_t: (a: number) => [number, number];
export const trace_truncated_at: (a: number) => [number, number];
export const trace_y: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_start: () => void;
