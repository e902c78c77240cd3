/* tslint:disable */
/* eslint-disable */

/**
 * Monte-Carlo moments `E[e^{−cot r·L_t}]` in the disc of radius `r`, with
 * `cot_scale = 0` as the control.
 */
export function ball_decay(radius: number, t: number, paths: number, seed: bigint, cot_scale: number): string;

/**
 * Conformal geodesic for `e^ψ ⊙ d` between two points of the plane. The unit
 * circle is the reference curve for the radial deviation.
 */
export function geodesic(psi: string, x0: number, y0: number, x1: number, y1: number, segments: number): string;

/**
 * Neumann `λ₁` of a disc on a polar grid against `½cot²r` and the Bessel value.
 */
export function spectral_gap(radius: number, cells: number): string;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly ball_decay: (a: number, b: number, c: number, d: bigint, e: number) => [number, number];
    readonly geodesic: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
    readonly spectral_gap: (a: number, b: number) => [number, number];
    readonly __externref_table_alloc: () => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
