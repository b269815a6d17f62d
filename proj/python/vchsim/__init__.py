from ._vchsim import (
    Config,
    ConfigError,
    SolverError,
    diagnose,
    homogeneous_oracle,
    load_config,
    parse_config,
    render_config,
    run,
    simulate,
    tau_refinement,
)

__all__ = [
    "Config",
    "ConfigError",
    "SolverError",
    "diagnose",
    "homogeneous_oracle",
    "load_config",
    "parse_config",
    "render_config",
    "run",
    "simulate",
    "tau_refinement",
]
