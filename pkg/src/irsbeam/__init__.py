"""Joint AP precoding and discrete IRS phase-shift optimisation."""
__version__ = "0.1.0"

from . import asymptotics, channel, errors, linalg, mu_phase, precoding, su_phase  # noqa: E402

__all__ = ["asymptotics", "channel", "errors", "linalg", "mu_phase", "precoding", "su_phase"]
