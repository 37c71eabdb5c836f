class DataError(ValueError):
    """Input data violates a contract (bad file, wrong shape, empty mask...)."""


class ImageFormatError(DataError):
    pass


class FlowFormatError(DataError):
    pass


class ModelFormatError(DataError):
    pass
