"""Points-to sets of every idiom program under each analysis.

    python demos/compare_analyses.py
"""

from pathlib import Path

from ptakit.ir import parse_module
from ptakit.query import analyze, format_locs, format_var

IDIOMS = Path(__file__).resolve().parent.parent / "corpus" / "idioms"
RUNS = [("fici", 0), ("steens", 0), ("kcfa", 1), ("fs", 0), ("fscs", 1)]


def main() -> None:
    for path in sorted(IDIOMS.glob("*.pir")):
        m = parse_module(path.read_text())
        results = [(f"{a}{k or ''}", analyze(m, a, k=k)) for a, k in RUNS]
        print(f"== {path.stem}")
        for var in results[0][1].variables():
            cells = "  ".join(f"{name}={format_locs(r.locations(var))}" for name, r in results)
            print(f"  {format_var(var):<16} {cells}")
        print()


if __name__ == "__main__":
    main()
