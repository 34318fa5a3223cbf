import sys
from pathlib import Path

# Put src/ on the path so the project's absolute imports resolve
ROOT_DIR = Path(__file__).resolve().parent
SRC_PATH = str(ROOT_DIR / "src")

if SRC_PATH not in sys.path:
    sys.path.insert(0, SRC_PATH)

from interfaces.cli import main

if __name__ == "__main__":
    sys.exit(main())
