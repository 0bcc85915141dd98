import enum


class BlockKind(str, enum.Enum):
    H_CNOT = "h_cnot"
    Z_C0 = "z_c0"
    Z_C1 = "z_c1"
    I_C0 = "i_c0"
    I_C1 = "i_c1"
    DELAY = "delay"

    @property
    def measures(self) -> bool:
        """Every block except Delay contains a mid-circuit measurement"""
        return self is not BlockKind.DELAY


class DDMode(str, enum.Enum):
    NONE = "none"
    MDD = "mdd"
    FFDD = "ffdd"
