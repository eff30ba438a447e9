"""
Configuration file for the HURRY simulator
Contains constants, architecture defaults and cycle-model settings
"""

# Application metadata
APP_TITLE = "HURRY Crossbar Simulator"
APP_ICON = "🧮"
APP_VERSION = "1.0.0"

# File schema versions
MODEL_SCHEMA_VERSION = "v1"
CONFIG_SCHEMA_VERSION = "v1"
PLAN_SCHEMA_VERSION = "v1"
REPORT_SCHEMA_VERSION = "v1"

# Run defaults
DEFAULT_SEED = 7
DEFAULT_OUTPUT_DIR = "reports/generated"

# Seconds the report viewer caches loaded files
CACHE_TTL = 60
DEFAULT_HARDWARE_CONFIG = "configs/hardware_default.json"
MODELS_DIR = "models"

# Architecture (one chip)
TILES = 16
IMAS_PER_TILE = 8
ARRAY_ROWS = 512
ARRAY_COLS = 512
IR_BYTES = 32 * 1024
OR_BYTES = 2 * 1024
EDRAM_BYTES = 512 * 1024
CLOCK_MHZ = 100

# Bitline conversions one IMA completes per clock (ADC count x samples per clock)
ADC_SAMPLES_PER_CYCLE = 128

# Crossbar voltage levels, in the order they are listed in trace dumps
VOLTAGE_LEVELS = ["GND", "V13", "V23", "VSET", "VRESET"]

# Max logic costs (one 2-bit compare takes 11 cycles, select takes 5)
CMP_CYCLES_PER_2BITS = 11
SEL_CYCLES = 5
# Logic columns beside every crossbar holding compare/select intermediates
GATE_CELLS = 6

# Writes spend one dedicated reset cycle before the column writes
INCLUDE_RESET = True

# Softmax look-up table
LUT_ENTRIES = 1024
SOFTMAX_LUT_CYCLES_PER_CLASS = 1
SOFTMAX_TOLERANCE = 1e-2
# exp table stops here; anything lower reads as zero
LUT_EXP_FLOOR = 24.0

# Sizing and placement compatibility switches
ALG1_CANONICAL = False
THROUGHPUT_INDEX_LITERAL = False

# Baseline (GEMM-only static arrays)
BASELINE_CELL_BITS = 2
BASELINE_ARRAY_SIZES = [128, 256, 512]
EDRAM_BYTES_PER_CYCLE = 32
DIGITAL_CYCLES_PER_ELEMENT = {
    "ReLU": 1,
    "Max": 1,
    "Res": 1,
    "Softmax": 4,
}

# Utilization report settings
UTILIZATION_DECIMALS = 6

# Chart color schemes
COLOR_SCHEME = {
    "primary": "#1f77b4",
    "secondary": "#ff7f0e",
    "success": "#2ca02c",
    "danger": "#d62728",
    "hurry": "#2ecc71",
    "baseline": "#e74c3c",
}

# Commands of the CLI front-end
COMMANDS = ["map", "simulate", "baseline", "compare", "trace-view"]
