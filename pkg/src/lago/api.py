"""HTTP JSON API for steering a live multi-stage trial.

Endpoints (all responses carry ``schema_version``):

    POST /api/trials                          create a trial
    GET  /api/trials/{id}                     full state incl. lock snapshots
    POST /api/trials/{id}/stages/{k}/rows     append outcome rows
    POST /api/trials/{id}/stages/{k}/lock     freeze a stage, persist next rec
    GET  /api/trials/{id}/fit                 pooled fit + tests on all rows
    GET  /api/trials/{id}/recommend           what-if recommendation (pure)
    GET  /api/trials/{id}/confset             confidence-set grid
    GET  /api/trials/{id}/bands               simultaneous band grid

Validation failures return 400 with a ``field`` path; lock-order and
immutability violations return 409; unknown trials 404.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse

from .estimation import (FitError, adjusted_group_test, fit_gee,
                         two_sample_means_test, wald_component_test)
from .inference import confidence_set, eta_and_se
from .links import inverse
from .model import TargetSpec
from .optimizer import iter_grid, recommend
from .quantiles import chi2_quantile, two_sided_z
from .serialize import (SCHEMA_VERSION, fit_to_dict, parse_cost, parse_z,
                        recommendation_to_dict, test_to_dict)
from .store import StoreError, TrialStore


def create_app(store: TrialStore) -> FastAPI:
    app = FastAPI(title="lago steering api", version="0.1.0")

    @app.exception_handler(StoreError)
    async def _store_error(_req: Request, exc: StoreError):
        body = {"schema_version": SCHEMA_VERSION, "error": exc.message}
        if exc.field_path:
            body["field"] = exc.field_path
        return JSONResponse(status_code=exc.status, content=body)

    @app.exception_handler(FitError)
    async def _fit_error(_req: Request, exc: FitError):
        return JSONResponse(status_code=400, content={
            "schema_version": SCHEMA_VERSION, "error": str(exc)})

    def _pooled_fit(state):
        ds = state.dataset()
        return ds, fit_gee(ds, state.link(), include_intercept=state.include_intercept())

    def _zref(state, override=None):
        if override is not None:
            return parse_z(override)
        q = len(state.rows[0]["z"]) if state.rows else 0
        return parse_z(state.config.get("z_ref", [0.0] * q))

    @app.post("/api/trials", status_code=201)
    async def create_trial(payload: dict):
        trial_id = payload.get("trial_id") or f"trial-{len(store.trial_ids()) + 1:04d}"
        config = {k: v for k, v in payload.items() if k != "trial_id"}
        store.create(trial_id, config)
        return {"schema_version": SCHEMA_VERSION, "trial_id": trial_id}

    @app.get("/api/trials")
    async def list_trials():
        return {"schema_version": SCHEMA_VERSION, "trials": store.trial_ids()}

    @app.get("/api/trials/{trial_id}")
    async def get_trial(trial_id: str):
        return store.full_state(trial_id)

    @app.post("/api/trials/{trial_id}/stages/{stage}/rows")
    async def append_rows(trial_id: str, stage: int, payload: dict):
        rows = payload.get("rows")
        if not isinstance(rows, list):
            raise StoreError(400, "payload must carry a rows array", field_path="rows")
        n = store.append_rows(trial_id, stage, rows)
        return {"schema_version": SCHEMA_VERSION, "appended": n,
                "stage": stage, "trial_id": trial_id}

    @app.post("/api/trials/{trial_id}/stages/{stage}/lock")
    async def lock_stage(trial_id: str, stage: int):
        snapshot = store.lock_stage(trial_id, stage)
        return {"schema_version": SCHEMA_VERSION, "trial_id": trial_id,
                "locked_stage": stage, "snapshot": snapshot}

    @app.get("/api/trials/{trial_id}/fit")
    async def get_fit(trial_id: str):
        state = store.get(trial_id)
        ds, fit = _pooled_fit(state)
        tests = [test_to_dict(wald_component_test(fit))]
        try:
            tests.append(test_to_dict(two_sample_means_test(ds)))
            tests.append(test_to_dict(adjusted_group_test(ds, state.link())))
        except FitError:
            pass  # single-arm data: only the component-wise test applies
        return {"schema_version": SCHEMA_VERSION, "trial_id": trial_id,
                "n_rows": ds.n_total, "fit": fit_to_dict(fit), "tests": tests}

    @app.get("/api/trials/{trial_id}/recommend")
    async def what_if(trial_id: str, theta: float = Query(None),
                      cost: str = Query(None), z: str = Query(None),
                      increment: float = Query(0.01)):
        state = store.get(trial_id)
        _, fit = _pooled_fit(state)
        cf = parse_cost(cost) if cost else state.cost()
        target = TargetSpec(theta if theta is not None else state.theta())
        rec = recommend(fit.beta_hat, _zref(state, z), state.bounds(), cf,
                        target, state.link(), increment)
        return {"schema_version": SCHEMA_VERSION, "trial_id": trial_id,
                "recommendation": recommendation_to_dict(rec),
                "theta": target.theta, "cost_kind": cf.kind}

    @app.get("/api/trials/{trial_id}/confset")
    async def confset(trial_id: str, increment: float = Query(0.1),
                      theta: float = Query(None), z: str = Query(None)):
        state = store.get(trial_id)
        _, fit = _pooled_fit(state)
        target = TargetSpec(theta if theta is not None else state.theta())
        cs = confidence_set(fit, state.link(), state.bounds(), _zref(state, z),
                            target, increment)
        return {"schema_version": SCHEMA_VERSION, "trial_id": trial_id,
                "grid_increment": cs.grid_increment,
                "total_grid_points": cs.total_grid_points,
                "member_count": len(cs.members),
                "set_percentage": cs.set_percentage,
                "members": [[float(v) for v in m.doses] for m in cs.members]}

    @app.get("/api/trials/{trial_id}/bands")
    async def bands(trial_id: str, increment: float = Query(0.1),
                    z: str = Query(None)):
        state = store.get(trial_id)
        _, fit = _pooled_fit(state)
        zref = _zref(state, z)
        link = state.link()
        mult = float(np.sqrt(chi2_quantile(0.95, fit.beta_hat.n_free)))
        zcrit = two_sided_z(0.95)
        entries = []
        for block in iter_grid(state.bounds(), increment):
            eta, se = eta_and_se(fit, block, zref)
            rows = zip(block, inverse(link, eta),
                       inverse(link, eta - mult * se), inverse(link, eta + mult * se),
                       inverse(link, eta - zcrit * se), inverse(link, eta + zcrit * se))
            entries.extend(
                {"x": [float(v) for v in x], "mean": float(m),
                 "band_lower": float(bl), "band_upper": float(bu),
                 "ci_lower": float(cl), "ci_upper": float(cu)}
                for x, m, bl, bu, cl, cu in rows)
        return {"schema_version": SCHEMA_VERSION, "trial_id": trial_id,
                "grid_increment": increment, "multiplier": mult,
                "entries": entries}

    return app


def serve(port: int, store_path: str, host: str = "127.0.0.1") -> None:
    import uvicorn
    app = create_app(TrialStore(store_path))
    uvicorn.run(app, host=host, port=port, log_level="warning")
