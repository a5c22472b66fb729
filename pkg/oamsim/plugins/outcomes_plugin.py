#!/usr/bin/env python3
"""
Outcomes Plugin for OAMSIM
Exact laws of outcome words and their convergence to the invariant law
"""

import asyncio
from typing import Any, Dict

from ..channel import invariant_state
from ..core import AnalysisPlugin, failure_result
from ..fock_ops import build_kraus
from ..measures import exact_outcome_distribution, shifted_distribution, tv_distance


class OutcomesPlugin(AnalysisPlugin):
    """Total-variation mixing of the outcome process"""

    @property
    def name(self) -> str:
        return "Outcomes"

    @property
    def version(self) -> str:
        return "1.0.0"

    @property
    def description(self) -> str:
        return "Exact outcome laws and their total-variation mixing"

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
        s = config.outcome_horizon
        rho0 = self.core.initial_state()
        kraus = build_kraus(params, d)
        workers = config.max_workers

        reference = exact_outcome_distribution(invariant_state(params.theta, d), params, d, s,
                                               kraus=kraus, max_workers=workers)
        rows = []
        for t in sorted(set(config.shift_grid)):
            law = shifted_distribution(rho0, params, d, t, s, kraus=kraus, max_workers=workers)
            tv = tv_distance(law, reference)
            rows.append({"t": t, "tv_distance": tv, "leakage": law.leakage})
            self.logger.debug(f"t={t}: TV {tv:.3e}")

        payload = {
            "horizon": s,
            "tv": rows,
            "invariant_law": reference.to_json(),
            "initial_law": exact_outcome_distribution(rho0, params, d, s, kraus=kraus,
                                                      max_workers=workers).to_json(),
        }
        self.core.write_table("outcomes", rows, ["t", "tv_distance", "leakage"])
        self.core.write_summary("outcomes", payload)
        return {"plugin": self.name, "status": "completed", "horizon": s,
                "tv": [(r["t"], r["tv_distance"]) for r in rows]}

    async def analyze(self, data: Any) -> Dict[str, Any]:
        try:
            return await asyncio.to_thread(self._run)
        except Exception as e:
            self.logger.error(f"outcome analysis failed: {e}")
            return failure_result(self.name, e)
