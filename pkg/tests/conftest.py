import sys
from pathlib import Path

# allow `import oracles` from test modules regardless of invocation directory
sys.path.insert(0, str(Path(__file__).resolve().parent))
