"""Memory SSA links and the backward slice of each load in one program.

    python demos/slice_load.py [program.pir] [analysis]
"""

import sys
from pathlib import Path

from ptakit.derived import build_memory_ssa, build_pdg, slice_pdg
from ptakit.ir import format_instruction, parse_module
from ptakit.query import analyze

DEFAULT = Path(__file__).resolve().parent.parent / "corpus" / "idioms" / "wrapper_alloc.pir"


def main(argv: list[str]) -> None:
    path = Path(argv[0]) if argv else DEFAULT
    analysis = argv[1] if len(argv) > 1 else "fici"
    m = parse_module(path.read_text())
    r = analyze(m, analysis)
    ssa = build_memory_ssa(m, r)
    pdg = build_pdg(m, ssa, r)
    for ins in m.instructions():
        if ins.op != "load":
            continue
        print(f"{ins.iid}  {format_instruction(ins)}")
        for obj in ssa.mu_objects(ins.iid):
            d = ssa.mu[(ins.iid, obj)]
            writers = ", ".join(str(w) for w in ssa.phi_sources(d))
            print(f"  mu {obj}: {d}  <- {writers}")
        for iid in sorted(slice_pdg(pdg, ins.iid)):
            print(f"    slice {iid}  {format_instruction(m.instruction(iid))}")


if __name__ == "__main__":
    main(sys.argv[1:])
