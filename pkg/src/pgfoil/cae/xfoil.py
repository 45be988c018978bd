"""Adapter around an external XFoil executable.

Each call runs in its own temporary directory and feeds XFoil this command
stream on stdin::

    PLOP / G F / <blank>        graphics off
    LOAD foil.dat               coordinates in the shared airfoil text format
    [PANE]                      only when repanel=True
    OPER
    [VISC <Re>]                 only when cond.viscous
    ITER <max_iterations>
    PACC / polar.txt / <blank>  start polar accumulation (no dump file)
    ALFA <alpha>
    PACC                        stop accumulation
    <blank> / QUIT

The polar file is parsed by locating the header row that contains the
``alpha`` and ``CL`` column names and reading the first numeric row under the
dashed separator, so extra or reordered columns are tolerated.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from pathlib import Path

from pgfoil.airfoil import Airfoil, write_dat
from pgfoil.cae.base import IO, PARSE, SOLVER, TIMEOUT, Converged, FlowConditions, NotConverged, OracleResult

DEFAULT_TIMEOUT = 30.0
ENV_PATH = "PGFOIL_XFOIL"


def command_stream(cond: FlowConditions, dat_name: str = "foil.dat", polar_name: str = "polar.txt",
                   repanel: bool = False) -> str:
    lines = ["PLOP", "G F", "", f"LOAD {dat_name}"]
    if repanel:
        lines.append("PANE")
    lines.append("OPER")
    if cond.viscous:
        lines.append(f"VISC {cond.reynolds:g}")
    lines += [f"ITER {cond.max_iterations}", "PACC", polar_name, "", f"ALFA {cond.angle_of_attack:g}",
              "PACC", "", "QUIT"]
    return "\n".join(lines) + "\n"


def parse_polar(text: str) -> float | None:
    """C_L of the first polar row, None when the polar has no data rows.

    Raises ``ValueError`` if no recognizable header exists.
    """
    lines = text.splitlines()
    for i, line in enumerate(lines):
        cols = line.split()
        lowered = [c.lower() for c in cols]
        if "alpha" in lowered and "cl" in lowered:
            col = lowered.index("cl")
            for row in lines[i + 1:]:
                if not row.strip() or set(row.strip()) <= {"-", " "}:
                    continue
                fields = row.split()
                try:
                    return float(fields[col])
                except (IndexError, ValueError):
                    raise ValueError(f"malformed polar row: {row!r}") from None
            return None
    raise ValueError("no 'alpha ... CL' header in polar output")


def resolve_executable(exe_path: str | None) -> str | None:
    path = exe_path or os.environ.get(ENV_PATH) or "xfoil"
    if os.path.sep in path:
        return path if os.path.isfile(path) and os.access(path, os.X_OK) else None
    return shutil.which(path)


def xfoil_evaluate(shape: Airfoil, cond: FlowConditions, exe_path: str | None = None,
                   workdir: str | None = None, timeout: float = DEFAULT_TIMEOUT,
                   repanel: bool = False) -> OracleResult:
    exe = resolve_executable(exe_path)
    if exe is None:
        return NotConverged(IO)
    try:
        run_dir = tempfile.mkdtemp(prefix="xfoil-", dir=workdir)
    except OSError:
        return NotConverged(IO)
    try:
        run = Path(run_dir)
        write_dat(run / "foil.dat", shape, name=shape.name or "pgfoil")
        try:
            subprocess.run([exe], input=command_stream(cond, repanel=repanel), cwd=run,
                           capture_output=True, text=True, timeout=timeout)
        except subprocess.TimeoutExpired:
            return NotConverged(TIMEOUT)
        except OSError:
            return NotConverged(IO)
        polar = run / "polar.txt"
        if not polar.exists():
            return NotConverged(PARSE)
        try:
            cl = parse_polar(polar.read_text())
        except ValueError:
            return NotConverged(PARSE)
        # XFoil only accumulates converged points, so an empty polar is a solver failure
        if cl is None:
            return NotConverged(SOLVER)
        return Converged(cl)
    finally:
        shutil.rmtree(run_dir, ignore_errors=True)


class XfoilOracle:
    name = "xfoil"

    def __init__(self, exe_path: str | None = None, workdir: str | None = None,
                 timeout: float = DEFAULT_TIMEOUT, repanel: bool = False):
        self.exe_path = exe_path
        self.workdir = workdir
        self.timeout = timeout
        self.repanel = repanel

    def evaluate(self, shape: Airfoil, cond: FlowConditions) -> OracleResult:
        return xfoil_evaluate(shape, cond, self.exe_path, self.workdir, self.timeout, self.repanel)
