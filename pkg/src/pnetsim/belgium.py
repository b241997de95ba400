"""Belgian NACE-64 reference inputs for the 2020-2021 pandemic scenario.

Per-sector rows: lockdown shock magnitudes in percent (labor supply during
the first and second lockdowns, household demand, exogenous demand), the
on-site consumption flag, the targeted days of input inventory, and the
pre-pandemic annual accounts in million EUR (gross output, household
consumption, exogenous consumption, labor compensation).
"""

from __future__ import annotations

from datetime import date

# code, eps_S_L1 %, eps_S_L2 %, eps_D %, eps_F %, on_site,
# n_days, x0, c0, f0, l0
SECTOR_TABLE = (
    ("A01",    6.5,  5.0, 10.0, 13.8, 0, 32.2, 16782,  2489,  3363,   491),
    ("A02",    6.5,  5.0, 10.0, 11.9, 0, 39.2,   648,    93,   163,    23),
    ("A03",    6.5,  5.0, 10.0, 14.8, 0, 73.4,   429,   206,    77,    28),
    ("B05-09", 6.5,  5.0, 10.0, 15.3, 0, 16.8, 24251,    25,  9447,   266),
    ("C10-12", 8.5,  3.0, 10.0, 15.0, 0, 38.5, 56386, 14792, 23096,  4324),
    ("C13-15", 61.0, 8.0, 10.0, 13.4, 0, 50.6, 12802,  3979,  6544,   880),
    ("C16",   30.0,  5.0, 10.0, 11.2, 0, 32.2,  4890,   228,  1672,   487),
    ("C17",   30.0,  5.0, 10.0, 14.1, 0, 28.8,  7857,   377,  3138,   642),
    ("C18",   28.1,  4.0, 10.0,  9.4, 0, 16.8,  3193,    63,   640,   674),
    ("C19",   14.0,  1.0, 10.0, 14.8, 0, 21.5, 32573,  3435, 15024,   233),
    ("C20",   14.0,  1.0, 10.0, 14.7, 0, 39.9, 62834,  1310, 39364,  3669),
    ("C21",   14.0,  1.0, 10.0, 14.9, 0, 47.6, 21378,  1304, 14566,  1548),
    ("C22",   19.0,  2.0, 10.0, 14.0, 0, 32.8, 14087,   559,  7425,  1410),
    ("C23",   19.0,  2.0, 10.0, 13.0, 0, 36.5,  8864,   351,  3015,  1491),
    ("C24",   15.0,  6.0, 10.0, 15.0, 0, 49.6, 29681,    49, 17145,  1975),
    ("C25",   15.0,  6.0, 10.0, 14.4, 0, 38.5, 14444,   246,  7317,  2274),
    ("C26",   13.5,  3.0, 10.0, 14.9, 0, 52.0, 15089,   803, 11006,   672),
    ("C27",   25.5,  8.0, 10.0, 14.9, 0, 46.3, 10145,  1134,  6066,  1007),
    ("C28",   25.5,  8.0, 10.0, 15.0, 0, 44.2, 23306,   223, 18380,  1812),
    ("C29",   57.0,  0.0, 10.0, 14.8, 0, 24.5, 42488,  3705, 31168,  1602),
    ("C30",   57.0,  0.0, 10.0, 15.1, 0, 64.4,  4474,   474,  3014,   425),
    ("C31-32", 67.5, 6.0, 10.0, 14.7, 0, 39.2, 17193,  2909, 12780,   721),
    ("C33",   28.1,  4.0, 10.0, 11.8, 0, 37.5,  8468,   214,  1920,  2325),
    ("D35",    0.0,  0.0,  0.0, 14.8, 0, 13.1, 19084,  5719,  4627,  2008),
    ("E36",    0.0,  0.0,  0.0, 14.8, 0,  5.7,  1233,   762,     0,   433),
    ("E37-39", 0.0,  0.0,  0.0,  7.6, 0, 11.7, 14748,  1255,  3681,  1581),
    ("F41-43", 43.5, 4.0, 10.0, 15.2, 0, 64.4, 68328,   609, 37917,  9383),
    ("G45",   42.7, 18.7, 80.0, 15.0, 1, 43.6, 11646,  4234,  4285,  3127),
    ("G46",   42.7, 18.7, 10.0, 15.0, 0, 18.4, 56373,  6329, 25408, 14907),
    ("G47",   42.7, 18.7, 10.0, 14.1, 1, 31.8, 23611, 22494,  1117,  8209),
    ("H49",   61.5,  6.0, 67.0, 14.9, 1,  1.7, 27054,  2217,  8686,  5460),
    ("H50",   61.5,  6.0, 67.0, 15.0, 1,  2.0,  5171,    10,  3027,   208),
    ("H51",   45.0,  1.0, 67.0, 15.0, 1,  1.7,  7891,   572,  2638,   477),
    ("H52",   14.0,  2.0,  0.0, 15.0, 1, 25.8, 31465,   263, 13833,  5370),
    ("H53",   61.5,  6.0,  0.0, 14.8, 1,  1.3,  4405,   191,   715,  1487),
    ("I55-56", 92.5, 70.0, 80.0, 80.0, 1, 7.4, 19527, 11300,  1693,  4036),
    ("J58",   16.0,  3.0,  0.0, 14.7, 0,  7.0,  6022,  1151,  1714,   802),
    ("J59-60", 16.0, 3.0,  0.0,  9.9, 0, 11.4,  5167,   868,  1500,   755),
    ("J61",   16.0,  3.0,  0.0, 15.0, 0,  6.0, 14003,  4335,  3237,  1797),
    ("J62-63", 16.0, 3.0,  0.0, 13.6, 0,  6.4, 21334,     0,  9662,  5509),
    ("K64",    2.5,  1.0,  0.0, 14.9, 0,  9.4, 20798,  3302,  2537,  3898),
    ("K65",    2.5,  1.0,  0.0, 14.9, 0,  9.7,  9448,  4150,   944,  2021),
    ("K66",    2.5,  1.0,  0.0, 15.0, 0,  9.4, 20464,  2691,  6250,  3569),
    ("L68",    0.0,  0.0,  0.0, 15.0, 1, 34.2, 46378, 33438,   214,  1166),
    ("M69-70", 17.0, 4.5,  0.0, 14.4, 1, 21.8, 20233,   546, 19687,  6691),
    ("M71",   17.0,  4.5,  0.0, 15.1, 0, 14.7, 13253,    94,  5477,  2433),
    ("M72",   17.0,  4.5,  0.0, 14.9, 0,  8.4, 20054,     0, 18169,  4925),
    ("M73",   17.0,  4.5,  0.0, 14.0, 0,  3.4,  9887,     3,  3821,   798),
    ("M74-75", 17.0, 4.5,  0.0, 14.6, 0,  8.4,  2779,   397,   322,   241),
    ("N77",   35.7,  4.3, 80.0, 80.0, 1,  3.4, 17691,  2292,  4093,  1214),
    ("N78",   15.5,  5.0,  0.0, 14.1, 0,  3.4,  7661,     0,    50,  6943),
    ("N79",   68.5, 45.0, 80.0, 80.0, 1,  3.4,  3225,  2770,    17,   365),
    ("N80-82", 24.0, 6.5,  0.0, 14.1, 0,  3.4, 13999,  1714,  2375,  5543),
    ("O84",    0.0,  0.0,  0.0,  0.7, 1,  9.4, 33807,  2729, 30292, 23682),
    ("P85",    0.0,  0.0,  0.0,  1.8, 1,  4.0, 27168,  1212, 24225, 21167),
    ("Q86",   40.0,  0.0,  0.0,  0.2, 1,  3.0, 32665,  6366, 22548, 10263),
    ("Q87-88", 40.0, 0.0,  0.0,  0.2, 1,  3.0, 15209,  6653,  8557, 11628),
    ("R90-92", 74.0, 57.0, 80.0, 80.0, 1, 2.3,  4914,  1983,  1886,  1279),
    ("R93",   74.0, 57.0, 80.0, 80.0, 1,  2.3,  2869,   961,   786,   622),
    ("S94",   74.0, 57.0, 10.0, 80.0, 1,  2.3,  6231,   115,  3090,  2437),
    ("S95",   28.1,  4.0, 10.0,  8.5, 1,  2.3,  1057,   582,    28,   106),
    ("S96",   74.0, 57.0, 80.0, 80.0, 1,  2.3,  3640,  3241,     7,   620),
    ("T97-98", 97.0, 85.0, 0.0, 14.8, 1,  9.4,   425,   425,     0,   425),
)

SECTOR_CODES = tuple(row[0] for row in SECTOR_TABLE)

# 2020-2021 Belgian pandemic timeline.
SIMULATION_START = date(2020, 3, 1)
KEY_DATES = (
    (date(2020, 3, 15), "lockdown_start"),
    (date(2020, 5, 4), "lockdown_end"),
    (date(2020, 10, 19), "lockdown_start"),
    (date(2020, 11, 16), "lockdown_light_start"),
    (date(2021, 5, 17), "lockdown_light_end"),
)

# Reference scalars: 70% of lost labor income reimbursed, one-week shock
# ramp-in, six-week ramp-out, residual shock ratio between lockdowns fixed
# at the midpoint of its plausible [0, 1] range.
FURLOUGH_FRACTION = 0.7
RAMP_IN_DAYS = 7.0
RAMP_OUT_DAYS = 42.0
INTER_LOCKDOWN_RATIO = 0.5

# Sector groups referenced by the calibration grid.
CONSUMER_FACING = ("I55-56", "N77", "N79", "R90-92", "R93", "S94", "S96")
RETAIL = ("G46", "G47")
NO_FIRING = ("O84", "P85")


def nace21_of(code64: str) -> str:
    """Aggregate a NACE-64 code to its NACE-21 section letter."""
    return code64[0]


def shock_percentages() -> dict[str, tuple[float, float, float, float, int]]:
    """Per-code (eps_S_L1, eps_S_L2, eps_D, eps_F, on_site), percents."""
    return {row[0]: (row[1], row[2], row[3], row[4], row[5])
            for row in SECTOR_TABLE}


def inventory_days() -> dict[str, float]:
    return {row[0]: row[6] for row in SECTOR_TABLE}


def initial_accounts() -> dict[str, tuple[float, float, float, float]]:
    """Per-code (x0, c0, f0, l0) in million EUR per year."""
    return {row[0]: (float(row[7]), float(row[8]), float(row[9]), float(row[10]))
            for row in SECTOR_TABLE}
