# config/settings.py
import os
from dotenv import load_dotenv

load_dotenv()  # Optional: Load .env file for local overrides

# --- Logging ---
LOG_LEVEL = os.getenv("LIGT_LOG_LEVEL", "INFO")

# --- LayoutHEI defaults ---
HASH_LEVELS = int(os.getenv("LIGT_HASH_LEVELS", "4"))
RHO_INIT = float(os.getenv("LIGT_RHO_INIT", "0.5"))
MAX_INPUT_LEN = int(os.getenv("LIGT_MAX_INPUT_LEN", "180"))  # question + linearized OCR tokens
MAX_ANSWER_LEN = int(os.getenv("LIGT_MAX_ANSWER_LEN", "16"))

# --- Evaluation ---
ANLS_TAU = float(os.getenv("LIGT_TAU", "0.5"))

# --- Runs ---
SEED = int(os.getenv("LIGT_SEED", "13"))
N_JOBS = int(os.getenv("LIGT_N_JOBS", "1"))
DATA_DIR = os.getenv("LIGT_DATA_DIR", "data")
MODEL_DIR = os.getenv("LIGT_MODEL_DIR", "models")
