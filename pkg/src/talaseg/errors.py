"""Exception hierarchy shared by the library and the command line tool."""


class TalasegError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class AudioReadError(TalasegError):
    """The audio file could not be opened or parsed."""

    exit_code = 2


class UnsupportedFormatError(AudioReadError):
    """The file is a WAV container but not PCM / IEEE float."""


class EmptyAudioError(AudioReadError):
    """The data chunk holds no samples."""


class TooShortError(TalasegError):
    """The recording is shorter than one rhythmogram window."""

    exit_code = 3


class DegenerateInputError(TalasegError):
    """Input carries no usable structure (silence, empty segmentation...)."""

    exit_code = 4


class DegenerateMixtureError(DegenerateInputError):
    """EM collapsed a Gaussian component even after reseeding."""
