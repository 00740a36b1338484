import sys
from pathlib import Path

# make sibling helper modules (oracles.py) importable regardless of cwd
sys.path.insert(0, str(Path(__file__).parent))
