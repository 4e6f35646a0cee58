"""Exceptions raised by echocons. All derive from ValueError."""


class DegenerateConnectivity(ValueError):
    def __init__(self, msg="degenerate connectivity"):
        super().__init__(msg)


class InvalidDrive(ValueError):
    def __init__(self, msg="invalid drive"):
        super().__init__(msg)


class DegenerateEnsemble(ValueError):
    def __init__(self, msg="degenerate ensemble"):
        super().__init__(msg)


class ZeroVarianceReadout(ValueError):
    def __init__(self, msg="zero-variance readout"):
        super().__init__(msg)


class RankDeficientDesign(ValueError):
    def __init__(self, msg="rank-deficient design; increase λ"):
        super().__init__(msg)


class DegenerateResponse(ValueError):
    def __init__(self, msg="degenerate response"):
        super().__init__(msg)
