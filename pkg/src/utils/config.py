import os
from pathlib import Path
from dotenv import load_dotenv

load_dotenv()

# Resolves to the project root folder
ROOT_DIR = Path(__file__).resolve().parent.parent.parent


class Config:
    # --- RUNTIME ---
    LOG_LEVEL = os.getenv("CAPILLARY_LOG_LEVEL", "INFO").upper()
    LOG_FILE = os.getenv("CAPILLARY_LOG_FILE")
    WORKERS = int(os.getenv("CAPILLARY_WORKERS", 4))

    # --- PATHS ---
    DATA_DIR = ROOT_DIR / "data"
    RESULTS_DIR = ROOT_DIR / "results"

    # --- NUMERIC TOLERANCES ---
    EPS_LP = 1e-7       # relative, LP feasibility/optimality
    EPS_LOAD = 1e-6     # "maximally loaded" and "entire traffic" thresholds
    EPS_ZERO = 1e-9     # flow-out coefficient treated as zero
    EPS_FLOW = 1e-9     # scaled arc flow below this carries nothing

    # --- CAPILLARY ---
    MAX_LAYERS = int(os.getenv("CAPILLARY_MAX_LAYERS", 10))
    LAYER_RANGE = (1, 10)

    # --- FEC ---
    FEC_M = 20
    FEC_DER = 1e-5
    FEC_BLOCK_CAP = 10 ** 6

    # 3.6% .. 7.8% step 0.3%, 15 values
    TOLERANCE_GRID = tuple(round(0.036 + 0.003 * i, 3) for i in range(15))

    # --- MANET ---
    RNG_NAME = "numpy.random.PCG64"
