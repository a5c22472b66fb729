#!/usr/bin/env python3
"""
Wasserstein Plugin for OAMSIM
W1 distance between the empirical law of trajectory states and the
invariant measure of Fock states
"""

import asyncio
from typing import Any, Dict

from ..core import AnalysisPlugin, failure_result
from ..measures import (empirical_state_measure, nu_inv_measure, wasserstein1,
                        wasserstein1_reference, wasserstein_to_nu_inv)
from ..trajectory import run_ensemble

REFERENCE_SUPPORT_MAX = 30


class WassersteinPlugin(AnalysisPlugin):
    """Convergence of the state law measured in W1"""

    @property
    def name(self) -> str:
        return "Wasserstein"

    @property
    def version(self) -> str:
        return "1.0.0"

    @property
    def description(self) -> str:
        return "W1 distance between the empirical state law and its invariant measure"

    async def initialize(self, core_app) -> bool:
        self.core = core_app
        self.logger = core_app.logger.getChild(self.name)
        return True

    async def cleanup(self) -> None:
        pass

    def _run(self) -> Dict[str, Any]:
        config = self.core.config
        params = self.core.params
        d = config.truncation
        seed = self.core.resolve_seed()
        rho0 = self.core.initial_state()

        ensemble = run_ensemble(rho0, params, d, config.horizon, config.n_trajectories, seed,
                                max_workers=config.max_workers,
                                guard=config.guard, leakage_budget=config.leakage_budget)
        start = empirical_state_measure([rho0] * config.n_trajectories)
        final = empirical_state_measure(ensemble.final_states())
        rows = [
            {"t": 0, "w1": wasserstein_to_nu_inv(start, params.theta, d), "support": len(start)},
            {"t": config.horizon, "w1": wasserstein_to_nu_inv(final, params.theta, d),
             "support": len(final)},
        ]

        target = nu_inv_measure(params.theta, d)
        payload: Dict[str, Any] = {"w1": rows, "tail_mass": target.tail_mass}
        # cross-check the exact solver on problems small enough for the dense LP
        if len(final) <= REFERENCE_SUPPORT_MAX and len(target) <= REFERENCE_SUPPORT_MAX:
            payload["reference_check"] = {
                "w1": wasserstein1(final, target),
                "w1_reference": wasserstein1_reference(final, target),
            }

        self.core.write_table("wasserstein", rows, ["t", "w1", "support"])
        self.core.write_summary("wasserstein", payload)
        self.logger.info(f"W1 {rows[0]['w1']:.3e} at t=0, {rows[1]['w1']:.3e} at t={config.horizon}")
        return {"plugin": self.name, "status": "completed",
                "w1": [(r["t"], r["w1"]) for r in rows]}

    async def analyze(self, data: Any) -> Dict[str, Any]:
        try:
            return await asyncio.to_thread(self._run)
        except Exception as e:
            self.logger.error(f"Wasserstein analysis failed: {e}")
            return failure_result(self.name, e)
