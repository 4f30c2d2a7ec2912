"""Event engine, downtime ledger and availability report."""

from terrasim.simkernel.engine import SimResult, Simulation, run
from terrasim.simkernel.ledger import (BUDGET_S, CATEGORIES, CAUSES, ROW_LABELS, BudgetCheck,
                                       DowntimeLedger, Interval, LedgerError, availability,
                                       budget_check, plan_overrun, union_downtime)
from terrasim.simkernel.report import AvailabilityReport, build_report
from terrasim.simkernel.scenario import Scenario, ScenarioError, ScenarioStep, load_scenario

__all__ = [
    "AvailabilityReport", "BUDGET_S", "BudgetCheck", "CATEGORIES", "CAUSES", "DowntimeLedger",
    "Interval", "LedgerError", "ROW_LABELS", "Scenario", "ScenarioError", "ScenarioStep",
    "SimResult", "Simulation", "availability", "budget_check", "build_report", "load_scenario",
    "plan_overrun", "run", "union_downtime",
]
