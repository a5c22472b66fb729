#!/usr/bin/env python3
"""
Verification Plugin for OAMSIM
Runs the property checks and writes a pass/fail report
"""

import asyncio
from typing import Any, Dict

from ..core import AnalysisPlugin, failure_result
from ..exceptions import ConfigIssue, ConfigValidationError
from ..verification import SCALES, VerificationContext, run_verification

REPORT_COLUMNS = ["name", "passed", "value", "threshold", "seconds"]


class VerificationPlugin(AnalysisPlugin):
    """Acceptance property suite"""

    @property
    def name(self) -> str:
        return "Verification"

    @property
    def version(self) -> str:
        return "1.0.0"

    @property
    def description(self) -> str:
        return "Runs the property suite and reports every check"

    async def initialize(self, core_app) -> bool:
        self.core = core_app
        self.logger = core_app.logger.getChild(self.name)
        return True

    async def cleanup(self) -> None:
        pass

    def _run(self, data: Dict[str, Any]) -> Dict[str, Any]:
        config = self.core.config
        if config.seed is None:
            raise ConfigValidationError([ConfigIssue("/seed", "verify needs a fixed seed")])
        ctx = VerificationContext(
            params=self.core.params,
            d=config.truncation,
            T=config.horizon,
            seed=config.seed,
            scale=SCALES[config.verify_scale],
            max_workers=config.max_workers,
        )
        if config.verify_scale != "full":
            self.logger.warning(f"verify scale '{config.verify_scale}' runs below acceptance sizes")
        results = run_verification(ctx, data.get("checks") or None)
        passed = all(r.passed for r in results)
        failed = [r.name for r in results if not r.passed]
        if failed:
            self.logger.warning(f"{len(failed)} checks failed: {', '.join(failed)}")

        self.core.write_table("verify", [{k: v for k, v in r.to_dict().items()
                                          if k in REPORT_COLUMNS} for r in results],
                              REPORT_COLUMNS)
        self.core.write_summary("verify", {
            "scale": config.verify_scale,
            "acceptance": config.verify_scale == "full",
            "passed": passed,
            "checks": [r.to_dict() for r in results],
        })
        return {
            "plugin": self.name,
            "status": "completed",
            "passed": passed,
            "failed": failed,
            "checks": [r.to_dict() for r in results],
        }

    async def analyze(self, data: Any) -> Dict[str, Any]:
        try:
            return await asyncio.to_thread(self._run, data or {})
        except Exception as e:
            self.logger.error(f"verification aborted: {e}")
            return failure_result(self.name, e)
