from .attackers import (
    ChallengeForger,
    CompromisedHub,
    PodThief,
    TamperingDistributor,
    WithholdingDistributor,
)
from .base import Actor, Package
from .device import IoTDevice
from .distributor import Distributor
from .hub import Hub
from .manufacturer import Manufacturer

__all__ = [
    "Actor",
    "ChallengeForger",
    "CompromisedHub",
    "Distributor",
    "Hub",
    "IoTDevice",
    "Manufacturer",
    "Package",
    "PodThief",
    "TamperingDistributor",
    "WithholdingDistributor",
]
