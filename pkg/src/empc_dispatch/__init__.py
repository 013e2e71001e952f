"""Economic MPC battery dispatch under monthly demand charges."""

from .controllers import (EMPC_STAR, NT, PROPOSED, TRAD, WT, Controller, PlantData,
                          make_controller)
from .sim import (ControllerConfig, CostReport, ScenarioConfig, SimulationTrace,
                  plant_step, run_closed_loop, settle_costs)
from .estimator import EMPCDispatcher
from .tariff import BessParams, PeakState, TariffSchedule
from .timegrid import HorizonSpec, TimeGrid, build_grid

__version__ = "0.1.0"

__all__ = [
    "EMPC_STAR", "NT", "PROPOSED", "TRAD", "WT", "Controller", "PlantData",
    "make_controller", "ControllerConfig", "CostReport", "ScenarioConfig",
    "SimulationTrace", "plant_step", "run_closed_loop", "settle_costs", "BessParams",
    "PeakState", "TariffSchedule", "HorizonSpec", "TimeGrid", "build_grid", "EMPCDispatcher",
]
