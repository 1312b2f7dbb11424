"""Exception types raised by the pipeline stages."""


class EncounterError(Exception):
    """Base class for pipeline errors that indicate bad data rather than a bug."""


class DegenerateBearing(EncounterError):
    """Bearing requested between two coincident points."""


class InsufficientSamples(EncounterError):
    """A trip has fewer samples than an operation needs."""


class MalformedInput(EncounterError):
    """An input file is structurally unusable (e.g. missing required columns)."""


class UnsortedInput(EncounterError):
    """Trips handed to the sweep are not ordered by start time."""


class EmptySeries(EncounterError):
    """DTW was asked to compare an empty series."""


class InvalidK(EncounterError):
    pass


class InvalidMatrix(EncounterError):
    pass


class MissingLabel(EncounterError):
    pass
