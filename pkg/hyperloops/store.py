from __future__ import annotations

import json
import typing as t

from contextlib import contextmanager

from sqlalchemy import (
    Column,
    Float,
    ForeignKey,
    Integer,
    MetaData,
    String,
    Text,
    create_engine,
)
from sqlalchemy.orm import Session, relationship, sessionmaker


try:
    from sqlalchemy.orm import declarative_base
except ImportError:
    # SQLAlchemy 1.3
    from sqlalchemy.ext.declarative import declarative_base

from .evaluation import SUMMARY_HEADER, ExperimentReport


METADATA_NAMING_CONVENTION = {
    "ix": "ix_%(column_0_label)s",
    "uq": "uq_%(table_name)s_%(column_0_name)s",
    "ck": "ck_%(table_name)s_%(constraint_name)s",
    "fk": "fk_%(table_name)s_to_%(column_0_name)s_on_%(referred_table_name)s",
    "pk": "pk_%(table_name)s",
}

Model = declarative_base(metadata=MetaData(naming_convention=METADATA_NAMING_CONVENTION))


def get_by_id(session: Session, model: t.Type[t.Any], ident: t.Any) -> t.Any:
    """
    ``session.get`` where available (SQLAlchemy 1.4+), ``Query.get`` on 1.3.
    """
    if hasattr(session, "get"):
        return session.get(model, ident)
    return session.query(model).get(ident)


class ExperimentRecord(Model):  # type: ignore[valid-type,misc]
    __tablename__ = "experiment"

    id = Column(Integer, primary_key=True)
    method = Column(String(32), nullable=False, index=True)
    dataset = Column(String(255), nullable=False, default="")
    mode = Column(String(32), nullable=False, default="full")
    repetitions = Column(Integer, nullable=False)
    auc_mean = Column(Float, nullable=False)
    auc_std = Column(Float, nullable=False)
    prec_mean = Column(Float, nullable=False)
    prec_std = Column(Float, nullable=False)
    config = Column(Text, nullable=False)
    version = Column(String(32), nullable=False)

    runs = relationship(
        "RunRecord",
        back_populates="experiment",
        order_by="RunRecord.repetition",
        cascade="all, delete-orphan",
    )

    def summary_row(self) -> tuple[t.Any, ...]:
        return tuple(getattr(self, key) for key in SUMMARY_HEADER)

    def __repr__(self):
        return (
            f"<ExperimentRecord(id={self.id!r}, method={self.method!r}, "
            f"dataset={self.dataset!r}, auc_mean={self.auc_mean!r})>"
        )


class RunRecord(Model):  # type: ignore[valid-type,misc]
    __tablename__ = "run"

    id = Column(Integer, primary_key=True)
    experiment_id = Column(Integer, ForeignKey("experiment.id"), nullable=False)
    repetition = Column(Integer, nullable=False)
    seed = Column(Integer, nullable=False)
    auc = Column(Float, nullable=False)
    precision = Column(Float, nullable=False)
    gamma = Column(Float, nullable=True)
    tau_max = Column(Integer, nullable=True)
    runtime = Column(Float, nullable=True)

    experiment = relationship("ExperimentRecord", back_populates="runs")


class ReportStore:
    """
    Persists experiment reports to a relational database, one ``experiment`` row
    per report and one ``run`` row per repetition.

    Usage::

        store = ReportStore("sqlite:///results.db")
        store.save(report)
        for row in store.summaries():
            print(row)
    """

    def __init__(self, database_uri: str = "sqlite://"):
        self.engine = create_engine(database_uri)
        Model.metadata.create_all(self.engine)
        self._session_factory = sessionmaker(bind=self.engine)

    @contextmanager
    def session_scope(self) -> t.Iterator[Session]:
        session = self._session_factory()
        try:
            yield session
            session.commit()
        except Exception:
            session.rollback()
            raise
        finally:
            session.close()

    def save(self, report: ExperimentReport, include_timings: bool = False) -> int:
        """
        :param report: The report to persist.
        :param include_timings: Whether to store per-run wall-clock times.
        :return: The id of the new ``experiment`` row.
        """
        from . import __version__

        agg = report.aggregate
        record = ExperimentRecord(
            method=report.method,
            dataset=report.dataset,
            mode=report.mode,
            repetitions=report.repetitions,
            config=json.dumps(report.config, sort_keys=True),
            version=__version__,
            **agg,
        )
        record.runs = [
            RunRecord(
                repetition=run.repetition,
                seed=run.seed,
                auc=run.auc,
                precision=run.precision,
                gamma=run.gamma,
                tau_max=run.tau_max,
                runtime=run.runtime if include_timings else None,
            )
            for run in report.runs
        ]
        with self.session_scope() as session:
            session.add(record)
            session.flush()
            return record.id

    def summaries(self, dataset: str | None = None) -> list[tuple[t.Any, ...]]:
        """
        Side-by-side rows ``(method, dataset, auc_mean, auc_std, prec_mean,
        prec_std)`` in insertion order, optionally for one dataset only.
        """
        with self.session_scope() as session:
            query = session.query(ExperimentRecord).order_by(ExperimentRecord.id)
            if dataset is not None:
                query = query.filter(ExperimentRecord.dataset == dataset)
            return [record.summary_row() for record in query]

    def runs(self, experiment_id: int) -> list[dict[str, t.Any]]:
        with self.session_scope() as session:
            record = get_by_id(session, ExperimentRecord, experiment_id)
            if record is None:
                return []
            return [
                {
                    "repetition": run.repetition,
                    "seed": run.seed,
                    "auc": run.auc,
                    "precision": run.precision,
                    "gamma": run.gamma,
                    "tau_max": run.tau_max,
                    "runtime": run.runtime,
                }
                for run in record.runs
            ]


__all__ = [
    "ExperimentRecord",
    "METADATA_NAMING_CONVENTION",
    "ReportStore",
    "RunRecord",
    "get_by_id",
]
