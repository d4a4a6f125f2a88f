"""Generated by scripts/tabulate_moduli.py; do not edit."""

LOW = {
    128: 0x87,
    192: 0x87,
    256: 0x425,
    320: 0x1b,
    384: 0x1df,
    448: 0xbd,
    512: 0x125,
    576: 0xa5f,
    640: 0x61b,
    704: 0x10d,
    768: 0x16c1,
    832: 0x1cd,
    896: 0xa9,
    960: 0x1b9,
    1024: 0x2cd,
    1088: 0xc9f,
    1152: 0x32d,
    1216: 0xa35,
    1280: 0x7b5,
    1344: 0x7ab,
    1408: 0x3bb,
    1472: 0x813,
    1536: 0x54b,
    1600: 0x879,
    1664: 0xdab,
    1728: 0xdd,
    1792: 0xaf,
    1856: 0x25d,
    1920: 0x80d,
    1984: 0x4d3,
    2048: 0xbc7,
    2304: 0x1a1,
    2560: 0x20b,
    2816: 0xc71,
    3072: 0x5db,
    3328: 0x11a9,
    3584: 0x965,
    3840: 0x142b,
    4096: 0xa93,
    4352: 0xc3f,
    4608: 0x1139,
    4864: 0xfa3,
    5120: 0x13bf,
    5376: 0x93,
    5632: 0x12e7,
    5888: 0x2703,
    6144: 0x1eeb,
    6400: 0xa71,
    6656: 0x1a6d,
    6912: 0x569,
    7168: 0x124b,
    7424: 0x1983,
    7680: 0x6b7,
    7936: 0x3f65,
    8192: 0x225,
    8448: 0x15e3,
    8704: 0x12c3,
    8960: 0xfc5,
    9216: 0xa1d,
    9472: 0x6dd,
    9728: 0xfa3,
    9984: 0x4c43,
    10240: 0x170f,
    10496: 0x9a9,
    10752: 0x49b,
    11008: 0x364b,
    11264: 0xcf5,
    11520: 0x1685,
    11776: 0x2919,
    12032: 0x395,
    12288: 0xa483,
}
