"""Graph-directed product measures driven by a state orbit.

A driven system assigns each infinite symbol string a mass built from
state-dependent branch weights; projecting through a contracting geometry
gives a measure on the carrier.  This package provides:

- exact and sampled cylinder masses and distribution functions (``measure``),
- checkable weight and box-separation conditions with witnesses
  (``conditions``),
- dimension estimates and bounds from entropy averages, closed forms, and a
  density fixed point (``dimension``, ``transfer``),
- self-affine curve families built from 2x2 fractional-linear matrices,
  including equivalence/singularity classification against product measures
  (``derham``, ``singularity``),
- a deterministic command-line front end (``gdmeasure``).
"""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    GdmError, ConfigError, StateSpaceError, ValidationError, BudgetError,
)
from .symbolic import (
    Word, NadicInterval, project, cylinder_interval, entropy, entropy_max,
    IfsGeometry, geometry_constants,
)
from .systems import (
    DrivenSystem, HataParams, evaluate_step, make_adf, make_kusuoka,
    make_kusuoka_from_harmonic, make_linear, make_toy, builtin_kinds,
    from_config, from_json,
)
from .measure import (
    cylinder_mass, log_cylinder_mass, interval_mass, IntervalMass,
    distribution_function, MassTrace, path_generator, sample_path,
    martingale_trace, PathStats, run_paths, trace_csv_rows,
)
from .conditions import (
    HOLDS_AT_RESOLUTION, FAILS_WITH_WITNESS, UNKNOWN, ConditionVerdict,
    OrbitApproximation, orbit, check_A, check_wA, check_B, check_sB,
    check_multisep2, verify_witness, verify_kigami,
)
from .dimension import (
    DimReport, KeyDeficit, entropy_average_mc, entropy_average_exact,
    dim_bounds, wa_lower_bound, key_deficit, pattern_frequency, dim_linear,
    dim_kinney, dim_hata, dim_report_mc,
)
from .derham import (
    LftMatrix, DeRhamSystem, phi_transform, matrices_from_json, validate,
    derived_system, curve_eval, curve_table, minkowski_system, moebius_system,
    moebius_distribution, linear_system, bernoulli_equivalence_params,
    is_ac_with_bernoulli, detect_moebius_case,
)
from .singularity import (
    AC_CERTIFIED, SINGULAR_CERTIFIED, AC_HEURISTIC, SINGULAR_HEURISTIC,
    INCONCLUSIVE, SingularityReport, hellinger_test, certify_singular,
    classify_derham, partial_sums_csv_rows,
)

_LAZY = {
    # transfer pulls scipy; load it on first use
    "DensityGrid": "transfer",
    "DensityIterationError": "transfer",
    "check_smooth_contracting": "transfer",
    "solve_density": "transfer",
    "dim_fanlau": "transfer",
    "grid_csv_rows": "transfer",
}


def __getattr__(name: str):
    module_name = _LAZY.get(name)
    if module_name is None:
        raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
    import importlib

    module = importlib.import_module(f".{module_name}", __name__)
    value = getattr(module, name)
    globals()[name] = value
    return value


def __dir__():
    return sorted(set(globals()) | set(_LAZY))
