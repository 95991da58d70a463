class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class EmptyAnchorSet(RuntimeError):
    """Order recovery found no usable endpoint anchor.

    Raised when no vertex escapes being a triple middle, or when the chosen
    anchor has no far partner. Both point at a window/precision that does not
    fit the data.
    """


class FormatError(ValueError):
    """A text file does not follow the expected layout."""


class ConfigError(ValueError):
    """Invalid run configuration."""
