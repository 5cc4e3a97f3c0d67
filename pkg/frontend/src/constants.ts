/** Raster semantics shared with the evaluation engine. */

export const NUM_CLASSES = 19;
export const NUM_STUFF = 11; // classes 0..10 are stuff, 11..18 are things

export const UNKNOWN_CLASS = 255;
export const OTHER_CLASS = 254;
export const NO_SEGMENT = 0;
export const UNKNOWN_INSTANCE = 0xffffffff;

// compact 16-bit encoding: id = class * 1000 + instance
export const COMPACT_UNKNOWN_CLASS = 65535;
export const COMPACT_OTHER_CLASS = 19000;
export const COMPACT_UNKNOWN_INSTANCE = 999;
export const MAX_COMPACT_INSTANCE = 998;

export const SCHEMA_VERSION = 1;
