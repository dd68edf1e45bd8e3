"""Application layer: command-line driver, serialization, corpus tools."""

from .bench import cmd_bench, parse_config, ratio_summary
from .diff import DiffReport, diff_dumps
from .dump import DumpResult, make_dump, read_dump
from .generator import GenParams, cmd_gen, generate_program
from .interpreter import Trace, interpret
from .main import RunConfig, cmd_analyze, main

__all__ = [
    "DiffReport",
    "DumpResult",
    "GenParams",
    "RunConfig",
    "Trace",
    "cmd_analyze",
    "cmd_bench",
    "cmd_gen",
    "diff_dumps",
    "generate_program",
    "interpret",
    "main",
    "make_dump",
    "parse_config",
    "ratio_summary",
    "read_dump",
]
