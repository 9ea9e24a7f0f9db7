"""Enumerations shared across services, schemas and the CLI."""
from enum import Enum


class SharingScheme(str, Enum):
    """In-band spectrum sharing approach for CM and DM pairs."""
    OVERLAY = "overlay"  # CM/DM overlay
    UNDERLAY1 = "underlay1"  # CM overlay / DM underlay
    UNDERLAY2 = "underlay2"  # CM/DM underlay


class SchedulerPolicy(str, Enum):
    """Scheduler weight factor policy."""
    ROUND_ROBIN = "round_robin"
    PROPORTIONAL_FAIRNESS = "proportional_fairness"


class UeRole(str, Enum):
    """Role of a user equipment in the population."""
    LEGACY_CUE = "cue"
    DUE_TX = "due_tx"
    DUE_RX = "due_rx"


class LinkDirection(str, Enum):
    UPLINK = "ul"
    DOWNLINK = "dl"


class ResourceGroup(str, Enum):
    """Orthogonal UL resource inside a cell. Same group means same resource."""
    A = "A"
    B = "B"


class DeploymentClass(str, Enum):
    """Fewer eNBs than UEs is sparse, otherwise dense."""
    SPARSE = "sparse"
    DENSE = "dense"


class Sense(str, Enum):
    """Constraint row sense."""
    LE = "<="
    EQ = "="


class GainSource(str, Enum):
    PROXIMITY = "proximity"
    HOP = "hop"
    REUSE = "reuse"


class JobStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    ERROR = "error"


class SweepKind(str, Enum):
    DENSIFICATION = "densification"
    UE_DENSITY = "ue_density"
