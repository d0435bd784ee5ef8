"""FastAPI application exposing the full train / evaluate / predict pipeline.

The app holds at most one model in memory for prediction (loaded explicitly
or lazily via ``model_path`` on the predict request); everything else reads
from and writes to the filesystem of the serving machine.
"""

from __future__ import annotations

import json
import logging

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..catalog import Catalog
from ..datasets import (
    filter_by_size,
    load_baskets,
    load_item_features,
    split_baskets,
    write_baskets,
)
from ..errors import DppNetError
from ..evaluation import EvalReport, auc, mpr
from ..kernel import condition, next_item_marginals
from ..modelfile import ModelFile, load_model, save_model
from ..network import Architecture
from ..synthetic import generate_planted_dpp, generate_xor_cooccurrence
from ..training import TrainingConfig, train
from . import schemas

logger = logging.getLogger(__name__)


def _report_to_schema(report: EvalReport) -> schemas.MetricReport:
    return schemas.MetricReport(
        metric=report.metric,
        segments=[
            schemas.SegmentRow(
                segment=row.segment,
                estimate=row.estimate,
                ci_low=row.ci_low,
                ci_high=row.ci_high,
                count=row.count,
            )
            for row in report.all_rows()
        ],
    )


def create_app() -> FastAPI:
    app = FastAPI(title="dppnet service", version=__version__)
    app.state.model = None
    app.state.model_path = None

    @app.exception_handler(DppNetError)
    async def domain_error(request: Request, exc: DppNetError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(KeyError)
    async def key_error(request: Request, exc: KeyError):
        return JSONResponse(status_code=400, content={"detail": str(exc.args[0])})

    @app.exception_handler(FileNotFoundError)
    async def missing_file(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    def ensure_model(model_path: str | None) -> ModelFile:
        if model_path and model_path != app.state.model_path:
            app.state.model = load_model(model_path)
            app.state.model_path = model_path
        if app.state.model is None:
            raise HTTPException(status_code=409, detail="no model loaded; supply model_path")
        return app.state.model

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(
            status="ok", version=__version__, model_loaded=app.state.model is not None
        )

    @app.post("/train", response_model=schemas.TrainResponse)
    def train_model(req: schemas.TrainRequest):
        catalog, baskets = load_baskets(req.baskets_path, req.basket_format)
        baskets, dropped = filter_by_size(baskets, req.max_basket_size)
        features = encoder = None
        if req.features_path is not None:
            features, encoder = load_item_features(req.features_path, catalog, req.hash_width)
        split = split_baskets(
            baskets,
            catalog,
            test_count=req.test_count,
            val_count=req.val_count,
            seed=req.seed,
            features=features,
        )
        arch = Architecture(
            catalog_size=catalog.size,
            embedding_dim=req.embedding_dim,
            hidden_widths=tuple(req.hidden_widths),
            meta_width=0 if features is None else features.shape[1],
        )
        cfg = TrainingConfig(
            alpha=req.alpha,
            batch_size=req.batch_size,
            max_iterations=req.max_iterations,
            convergence_rel_tol=req.convergence_rel_tol,
            validation_check_period=req.validation_check_period,
            seed=req.seed,
            worker_count=req.workers,
            learning_rate=req.learning_rate,
        )
        params, V, log = train(split, arch, cfg)
        model = ModelFile(
            catalog=catalog,
            arch=arch,
            params=params,
            embeddings=V,
            training_config=req.model_dump(),
            feature_encoder=encoder,
            features=features,
        )
        save_model(req.output_path, model)
        log_path = req.log_path or req.output_path + ".log.csv"
        log.to_csv(log_path)
        final_val = next(
            (r.val_loglik for r in reversed(log.records) if r.val_loglik is not None), None
        )
        return schemas.TrainResponse(
            model_path=req.output_path,
            log_path=log_path,
            iterations=len(log.records),
            final_train_loss=log.records[-1].train_loss if log.records else None,
            final_val_loglik=final_val,
            catalog_size=catalog.size,
            train_baskets=len(split.train),
            validation_baskets=len(split.validation),
            test_baskets=len(split.test),
            dropped_oversized=dropped,
        )

    @app.post("/evaluate", response_model=schemas.EvalResponse)
    def evaluate(req: schemas.EvalRequest):
        model = load_model(req.model_path)
        file_catalog, raw_baskets = load_baskets(req.baskets_path, req.basket_format)
        baskets, skipped = [], 0
        for basket in raw_baskets:
            try:
                baskets.append(model.catalog.to_indices(file_catalog.to_ids(basket)))
            except KeyError:
                skipped += 1
        if skipped:
            logger.warning("skipped %d basket(s) with items unknown to the model", skipped)
        if req.use_split:
            baskets = split_baskets(
                baskets, model.catalog, req.test_count, req.val_count, seed=req.seed
            ).test
        reports = []
        if req.metric in ("mpr", "both"):
            reports.append(mpr(model.embeddings, baskets, seed=req.seed))
        if req.metric in ("auc", "both"):
            reports.append(auc(model.embeddings, baskets, seed=req.seed))
        files = []
        if req.output_prefix:
            for report in reports:
                json_path = f"{req.output_prefix}.{report.metric}.json"
                csv_path = f"{req.output_prefix}.{report.metric}.csv"
                report.write_json(json_path)
                report.write_csv(csv_path)
                files.extend([json_path, csv_path])
        return schemas.EvalResponse(
            reports=[_report_to_schema(r) for r in reports],
            report_files=files,
            evaluated_baskets=len(baskets),
            skipped_baskets=skipped,
        )

    @app.post("/models/load", response_model=schemas.ModelInfo)
    def load_into_memory(req: schemas.LoadModelRequest):
        app.state.model = load_model(req.model_path)
        app.state.model_path = req.model_path
        return current_model()

    @app.get("/models/current", response_model=schemas.ModelInfo)
    def current_model():
        model = ensure_model(None)
        return schemas.ModelInfo(
            model_path=app.state.model_path,
            catalog_size=model.catalog.size,
            embedding_dim=model.arch.embedding_dim,
            hidden_widths=list(model.arch.hidden_widths),
            meta_width=model.arch.meta_width,
        )

    @app.post("/predict", response_model=schemas.PredictResponse)
    def predict(req: schemas.PredictRequest):
        model = ensure_model(req.model_path)
        members = model.catalog.to_indices(req.basket)
        if len(members) == model.catalog.size:
            return schemas.PredictResponse(basket=req.basket, predictions=[])
        marginals = next_item_marginals(condition(model.embeddings, members))
        ranked = sorted(marginals.items(), key=lambda pair: (-pair[1], pair[0]))
        return schemas.PredictResponse(
            basket=req.basket,
            predictions=[
                schemas.Prediction(item_id=model.catalog.ids[i], probability=p)
                for i, p in ranked[: req.top_k]
            ],
        )

    @app.post("/synthesize", response_model=schemas.SynthResponse)
    def synthesize(req: schemas.SynthRequest):
        catalog = Catalog.from_ids([f"item{i:04d}" for i in range(req.catalog_size)])
        if req.kind == "planted":
            V, baskets = generate_planted_dpp(
                req.catalog_size, req.embedding_dim, req.basket_count, req.seed
            )
            truth = {"kind": "planted", "embeddings": V.tolist(), "catalog_ids": list(catalog.ids)}
        else:
            baskets, attributes = generate_xor_cooccurrence(
                req.catalog_size, req.basket_count, req.seed
            )
            truth = {
                "kind": "xor",
                "attributes": attributes.tolist(),
                "catalog_ids": list(catalog.ids),
            }
        write_baskets(req.output_path, catalog, baskets, req.basket_format)
        truth_path = req.truth_path or req.output_path + ".truth.json"
        with open(truth_path, "w", encoding="utf-8") as handle:
            json.dump(truth, handle, sort_keys=True)
            handle.write("\n")
        return schemas.SynthResponse(
            output_path=req.output_path,
            truth_path=truth_path,
            catalog_size=req.catalog_size,
            basket_count=len(baskets),
        )

    @app.post("/export", response_model=schemas.ExportResponse)
    def export_embeddings(req: schemas.ExportRequest):
        model = load_model(req.model_path)
        V = model.embeddings
        with open(req.output_path, "w", encoding="utf-8") as handle:
            handle.write(",".join(["item_id"] + [f"e{j}" for j in range(V.shape[1])]) + "\n")
            for item, row in zip(model.catalog.ids, V):
                handle.write(",".join([item] + [repr(float(x)) for x in row]) + "\n")
        return schemas.ExportResponse(
            output_path=req.output_path, rows=V.shape[0], columns=V.shape[1]
        )

    return app


app = create_app()
