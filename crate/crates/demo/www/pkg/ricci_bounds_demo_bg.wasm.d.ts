/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const ball_decay: (a: number, b: number, c: number, d: bigint, e: number) => [number, number];
export const geodesic: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number];
export const spectral_gap: (a: number, b: number) => [number, number];
export const __externref_table_alloc: () => number;
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
