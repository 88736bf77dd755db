import sys
from pathlib import Path

# the scripts are meant to run standalone from their own directory; give the
# tests the same import view
sys.path.insert(0, str(Path(__file__).resolve().parents[1]))
