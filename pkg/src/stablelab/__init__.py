"""stablelab: a numerical laboratory for stable heat kernels, Hoelder-drift
flows, frozen-coefficient Duhamel solvers, and empirical Schauder constants
for supercritical non-local parabolic equations."""

__version__ = "0.1.0"

from .spectral_models import (  # noqa: F401
    ModelKind,
    StableModel,
    SymbolValue,
    carre_du_champ,
    levy_apply,
    symbol,
    symbol_array,
)

from .kernel_engine import (  # noqa: F401
    DensityField,
    GridSpec,
    SamplePack,
    density_fft,
    density_relativistic,
    load_density,
    radial_profile_csv,
    sample_stable,
    save_density,
    suggest_grid,
)

from .flow_engine import (  # noqa: F401
    DriftField,
    FlowStabilityReport,
    FlowTrajectory,
    flow_stability_check,
    frozen_shift,
    integrate_flow,
    mollify,
    write_trajectory_csv,
)

from .integrability import (  # noqa: F401
    DEFAULT_TIME_LADDER,
    TEMPERED_TIME_LADDER,
    DivergenceReport,
    EnvelopeReport,
    MomentProbe,
    MomentValue,
    SmoothingReport,
    divergence_sweep,
    kolokoltsov_check,
    moment_integral,
    pbeta_report,
    probe_moments,
    write_probe_csv,
    write_report_json,
)
