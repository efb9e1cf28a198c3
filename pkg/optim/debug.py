"""
Exports de débogage des optimiseurs
"""

from pathlib import Path
from typing import Any, Dict, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sps

PathLike = Union[str, Path]

TRACE_COLUMNS = ["iteration", "objective", "merit", "max_residual", "trust_radius", "ratio", "accepted"]


def write_lp_model(
    path: PathLike,
    c: np.ndarray,
    a_ub: sps.spmatrix,
    b_ub: np.ndarray,
    bounds: Sequence[Tuple[float, float]],
    labels: Sequence[str],
) -> Path:
    """Modèle linéaire en texte : variables, bornes puis une ligne par contrainte"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = len(c)
    half = n // 2
    names = [f"p_ch[{t}]" for t in range(half)] + [f"p_dch[{t}]" for t in range(n - half)]

    a_ub = sps.csr_matrix(a_ub)
    lines = ["# variables (coût, borne inf, borne sup)"]
    for name, cost, (lo, hi) in zip(names, c, bounds):
        lines.append(f"{name} {cost:.17g} {lo:.17g} {hi:.17g}")

    lines.append("# contraintes A_ub·x <= b_ub")
    for k, label in enumerate(labels):
        row = a_ub.getrow(k)
        terms = " ".join(f"{v:+.17g}*{names[j]}" for j, v in zip(row.indices, row.data))
        lines.append(f"{label}: {terms} <= {b_ub[k]:.17g}")

    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_trace(path: PathLike, trace: Sequence[Dict[str, Any]]) -> Path:
    """Trace des itérations du solveur non linéaire en CSV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(trace), columns=TRACE_COLUMNS)
    frame.to_csv(path, index=False, float_format="%.17g")
    return path
