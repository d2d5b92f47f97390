"""Package exceptions, mapped to CLI exit codes."""


class ConfigError(ValueError):
    """Invalid or inconsistent configuration (CLI exit code 2)."""


class GuardError(RuntimeError):
    """A search-space or enumeration guard was exceeded (CLI exit code 3)."""


class RankDeficiencyError(RuntimeError):
    """A detector requiring full column rank met a rank-deficient channel (exit 3)."""


class CertificationError(RuntimeError):
    """A diversity certification check failed (CLI exit code 4)."""
