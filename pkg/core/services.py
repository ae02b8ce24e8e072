# core/services.py
"""
Matching service: runs a RunConfig in batch or streaming form, writes result files,
evaluates decision files and benchmarks per-frame matching cost against map size
"""

import time
import timeit
from collections import deque
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
import toml

from core.exceptions import ConfigurationError, FormatError, ParseError
from core.metrics import evaluate, pr_frame, report_row, summary_lines
from core.models import (
    BenchRow, ConfidenceMode, ConsistencyResult, EvalReport, MatchDecision, MatchMode, RunConfig, SeqParams,
    SicParams, SynthConfig, TechniqueInput, TechniqueSet
)
from core.music import StreamingMusic, music_match, scaled_views, selection_counts, trace_frame
from core.plots import svg_line_chart, write_svg
from core.scaling import zscore_row
from core.seqmatch import StreamingSeq, argmax_match, argmax_row, contrast_enhance, enhance_row, search_trajectories, seq_match
from core.sic import StreamingSic, candidate_thetas, sic_match, theta_table_frame, top_k_candidates
from core.simdata import iter_matrix_rows, load_ground_truth, load_technique_set
from core.synth import generate_technique_set
from utils.config import Config
from utils.logger import logger


DECISION_COLUMNS = ['query_index', 'technique_id', 'match_index', 'theta', 'confidence']


def _decision(result: ConsistencyResult, technique_id: str, score: Optional[float],
              confidence: ConfidenceMode) -> MatchDecision:
    return MatchDecision(
        query=result.query,
        technique_id=technique_id,
        match_index=result.match_index,
        theta=result.theta,
        confidence=score if confidence == "score" and score is not None else result.theta,
    )


def decisions_frame(decisions: Sequence[MatchDecision]) -> pd.DataFrame:
    return pd.DataFrame(
        [(d.query, d.technique_id, d.match_index, d.theta, d.confidence) for d in decisions],
        columns=DECISION_COLUMNS,
    )


def load_decisions(path) -> List[MatchDecision]:
    """Read a decisions CSV written by the match command"""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Decisions file not found: {path}")
    try:
        df = pd.read_csv(path, dtype={'technique_id': str})
    except pd.errors.EmptyDataError:
        raise FormatError(f"{path}: empty decisions file")
    missing = [c for c in DECISION_COLUMNS if c not in df.columns]
    if missing:
        raise FormatError(f"{path}: missing columns {missing}")
    try:
        return [
            MatchDecision(query=int(row.query_index), technique_id=str(row.technique_id),
                          match_index=int(row.match_index), theta=float(row.theta),
                          confidence=float(row.confidence))
            for row in df.itertuples(index=False)
        ]
    except (TypeError, ValueError) as e:
        raise ParseError(f"{path}: {e}")


def recorded_mode(decisions_path) -> Optional[str]:
    """Mode of the match run that wrote a decisions file, from its run record if present"""
    path = Path(decisions_path).with_name(Config.RUN_RECORD)
    if not path.exists():
        return None
    try:
        return toml.load(path).get('run', {}).get('mode')
    except toml.TomlDecodeError as e:
        logger.warning(f"Ignoring unreadable run record {path}: {e}", "SERVICE")
        return None


class MatchingService:
    """Runs matchers over technique sets and produces decision, trace and timing records"""

    def __init__(self, settings: Optional[Dict] = None):
        self.settings = settings or {}
        logger.debug(f"Matching service initialized (API {Config.API_VERSION})", "SERVICE")

    def get_service_status(self) -> Dict:
        return {
            'api_version': Config.API_VERSION,
            'timestamp': datetime.now().isoformat(),
            'modes': ['sic', 'music', 'seqslam', 'argmax'],
            'defaults': {
                'sic': SicParams().model_dump(),
                'seqslam': SeqParams().model_dump(),
                'allowance': Config.DEFAULT_ALLOWANCE,
            },
            'settings': dict(self.settings),
        }

    # -------------------------------------------------------------------------
    # Batch
    # -------------------------------------------------------------------------

    def match_techniques(self, techniques: TechniqueSet, mode: MatchMode, sic: SicParams = SicParams(),
                         seq: SeqParams = SeqParams(), scale: bool = True,
                         confidence: ConfidenceMode = "theta") -> Dict:
        """Match every query row; per-query wall time is recorded around each match call"""
        start_time = time.time()
        rows, cols = techniques.shape
        decisions: List[MatchDecision] = []
        results: List[ConsistencyResult] = []
        timings: List[float] = []

        if mode == "music":
            for q in range(rows):
                t0 = timeit.default_timer()
                decisions.append(music_match(techniques, q, sic, scale, confidence))
                timings.append((timeit.default_timer() - t0) * 1000)
        else:
            if len(techniques) != 1:
                raise ConfigurationError(f"{mode} mode needs exactly one technique, got {len(techniques)}")
            tid = techniques.ids[0]
            if mode == "sic":
                view = scaled_views(techniques, scale)[tid]
            elif mode == "seqslam":
                view = contrast_enhance(techniques.matrix(tid), seq.r_window)
            else:
                view = techniques.matrix(tid)

            for q in range(rows):
                t0 = timeit.default_timer()
                if mode == "sic":
                    result = sic_match(view, q, sic)
                elif mode == "seqslam":
                    result = seq_match(view, q, seq)
                else:
                    result = argmax_match(view, q)
                timings.append((timeit.default_timer() - t0) * 1000)
                score = float(view.values[q, result.match_index]) if mode == "sic" else None
                results.append(result)
                decisions.append(_decision(result, tid, score, confidence))

        trace = [(d.query, d.technique_id) for d in decisions] if mode == "music" else None
        processing_time = int((time.time() - start_time) * 1000)
        logger.info(f"Matched {rows} queries against {cols} references in {mode} mode in {processing_time}ms",
                    "SERVICE")
        return {
            'decisions': decisions,
            'results': results,
            'trace': trace,
            'timings_ms': timings,
            'processing_stats': {
                'mode': mode,
                'queries': rows,
                'references': cols,
                'techniques': techniques.ids,
                'processing_time_ms': processing_time,
                'selection_shares': selection_counts(trace, techniques.ids) if trace else None,
            }
        }

    # -------------------------------------------------------------------------
    # Streaming
    # -------------------------------------------------------------------------

    def _technique_rows(self, inputs: Sequence[TechniqueInput]) -> Iterator[Dict[str, np.ndarray]]:
        """Rows of every technique in lockstep, distance techniques negated"""
        iterators = [iter_matrix_rows(t.path) for t in inputs]
        q = 0
        while True:
            rows = {}
            for technique, rows_iter in zip(inputs, iterators):
                row = next(rows_iter, None)
                if row is not None:
                    rows[technique.technique_id] = -row if technique.distance else row
            if not rows:
                return
            if len(rows) != len(inputs):
                raise ConfigurationError(f"Techniques end at different query counts (query {q})")
            widths = {row.size for row in rows.values()}
            if len(widths) != 1:
                raise ConfigurationError(f"Techniques disagree on reference count at query {q}: {sorted(widths)}")
            yield rows
            q += 1

    def stream_match(self, config: RunConfig) -> Dict:
        """Row-by-row matching; only the rolling history is resident"""
        start_time = time.time()
        decisions: List[MatchDecision] = []
        results: List[ConsistencyResult] = []
        timings: List[float] = []
        ids = [t.technique_id for t in config.techniques]
        tid = ids[0]

        if config.mode == "music":
            matcher = StreamingMusic(ids, config.sic, config.scale, config.confidence)
        elif config.mode == "sic":
            matcher = StreamingSic(config.sic, config.scale)
        elif config.mode == "seqslam":
            matcher = StreamingSeq(config.seq)

        resident = 0
        references = 0
        for q, rows in enumerate(self._technique_rows(config.techniques)):
            references = references or next(iter(rows.values())).size
            t0 = timeit.default_timer()
            if config.mode == "music":
                decisions.append(matcher.push(rows))
            else:
                result = argmax_row(rows[tid], q) if config.mode == "argmax" else matcher.push(rows[tid])
                score = float(matcher.latest_row[result.match_index]) if config.mode == "sic" else None
                results.append(result)
                decisions.append(_decision(result, tid, score, config.confidence))
            timings.append((timeit.default_timer() - t0) * 1000)
            if config.mode in ("sic", "seqslam"):
                resident = max(resident, matcher.resident_rows)

        if not decisions:
            raise FormatError("Technique files contain no rows")
        trace = [(d.query, d.technique_id) for d in decisions] if config.mode == "music" else None
        processing_time = int((time.time() - start_time) * 1000)
        logger.info(f"Streamed {len(decisions)} queries in {config.mode} mode in {processing_time}ms", "SERVICE")
        return {
            'decisions': decisions,
            'results': results,
            'trace': trace,
            'timings_ms': timings,
            'processing_stats': {
                'mode': config.mode,
                'queries': len(decisions),
                'references': references,
                'techniques': ids,
                'processing_time_ms': processing_time,
                'max_resident_rows': resident,
                'selection_shares': selection_counts(trace, ids) if trace else None,
            }
        }

    # -------------------------------------------------------------------------
    # Files
    # -------------------------------------------------------------------------

    def run(self, config: RunConfig) -> Dict:
        """Execute a RunConfig and write its output files"""
        if config.stream:
            outcome = self.stream_match(config)
        else:
            techniques = load_technique_set(config.techniques)
            outcome = self.match_techniques(techniques, config.mode, config.sic, config.seq,
                                            config.scale, config.confidence)
        outcome['files'] = self.write_match_outputs(outcome, config.out_dir, config.svg)
        outcome['files'].append(self.write_run_record(config))

        if config.gt_path:
            stats = outcome['processing_stats']
            gt = load_ground_truth(config.gt_path, config.allowance, query_count=stats['queries'])
            report = evaluate(outcome['decisions'], gt, n_refs=stats['references'],
                              timings_ms=outcome['timings_ms'])
            outcome['report'] = report
            outcome['files'] += self.write_report(report, config.out_dir, config.svg)
        return outcome

    def write_run_record(self, config: RunConfig) -> str:
        """run.toml beside the decisions: mode, seed and parameters of the run"""
        record = {
            'run': config.model_dump(include={'mode', 'seed', 'stream', 'scale', 'confidence', 'allowance'}),
            'matching': config.sic.model_dump(),
            'seqslam': config.seq.model_dump(),
            'techniques': {t.technique_id: {'path': t.path, 'distance': t.distance} for t in config.techniques},
        }
        with open(Path(config.out_dir) / Config.RUN_RECORD, 'w') as f:
            toml.dump(record, f)
        return Config.RUN_RECORD

    def write_match_outputs(self, outcome: Dict, out_dir, svg: bool = False) -> List[str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []

        decisions_frame(outcome['decisions']).to_csv(out / 'decisions.csv', index=False)
        written.append('decisions.csv')

        pd.DataFrame({
            'query_index': [d.query for d in outcome['decisions']],
            'ms': outcome['timings_ms'],
        }).to_csv(out / 'timing.csv', index=False)
        written.append('timing.csv')

        if outcome['trace'] is not None:
            trace_frame(outcome['trace']).to_csv(out / 'selection_trace.csv', index=False)
            written.append('selection_trace.csv')
            if svg:
                write_svg(self._trace_chart(outcome['trace'], outcome['processing_stats']['techniques']),
                          out / 'selection_trace.svg')
                written.append('selection_trace.svg')

        if outcome['processing_stats']['mode'] == 'sic' and outcome['results']:
            theta_table_frame(outcome['results']).to_csv(out / 'theta_table.csv', index=False)
            written.append('theta_table.csv')

        logger.info(f"Wrote {', '.join(written)} to {out}", "SERVICE")
        return written

    @staticmethod
    def _trace_chart(trace, technique_ids: Sequence[str]) -> str:
        lanes = {tid: i for i, tid in enumerate(technique_ids)}
        series = {}
        for tid in technique_ids:
            queries = [q for q, t in trace if t == tid]
            series[tid] = (queries, [lanes[tid]] * len(queries))
        return svg_line_chart(series, "Technique selection per query", "query", "technique", step=False)

    def write_report(self, report: EvalReport, out_dir, svg: bool = False) -> List[str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        pr_frame(report.pr_points).to_csv(out / 'pr.csv', index=False)
        (out / 'summary.txt').write_text("\n".join(summary_lines(report)) + "\n")
        report_row(report).to_csv(out / 'report.csv', index=False)
        written = ['pr.csv', 'summary.txt', 'report.csv']
        if svg:
            points = sorted(report.pr_points, key=lambda p: p.recall)
            chart = svg_line_chart({'PR': ([p.recall for p in points], [p.precision for p in points])},
                                   f"Precision-recall (AUC {report.auc:.3f})", "recall", "precision", step=True)
            write_svg(chart, out / 'pr_curve.svg')
            written.append('pr_curve.svg')
        return written

    def evaluate_files(self, decisions_path, gt_path, allowance: int, out_dir,
                       timing_path=None, n_refs: Optional[int] = None, svg: bool = False) -> Dict:
        """Evaluate a decisions CSV against a ground truth CSV and write the report files"""
        decisions = load_decisions(decisions_path)
        gt = load_ground_truth(gt_path, allowance)
        timings = None
        if timing_path:
            try:
                timings = pd.read_csv(timing_path)['ms'].astype(float).tolist()
            except (KeyError, ValueError, pd.errors.EmptyDataError) as e:
                raise FormatError(f"{timing_path}: cannot read per-frame timings ({e})")

        report = evaluate(decisions, gt, n_refs, timings)
        files = self.write_report(report, out_dir, svg)

        technique_ids = list(dict.fromkeys(d.technique_id for d in decisions))
        if len(technique_ids) > 1 or recorded_mode(decisions_path) == "music":
            trace = [(d.query, d.technique_id) for d in decisions]
            trace_frame(trace).to_csv(Path(out_dir) / 'selection_trace.csv', index=False)
            files.append('selection_trace.csv')
        return {'report': report, 'files': files}

    # -------------------------------------------------------------------------
    # Bench
    # -------------------------------------------------------------------------

    def run_bench(self, sizes: Sequence[int], queries: int = Config.DEFAULT_BENCH_QUERIES,
                  sic: SicParams = SicParams(), seq: SeqParams = SeqParams(), seed: int = 0) -> List[BenchRow]:
        """
        Median per-frame cost for each map size. Matrix generation is excluded; every
        matcher runs in streaming form so a frame includes its own row scaling.
        """
        if len(sizes) < 2:
            raise ConfigurationError(f"Bench needs at least two map sizes, got {list(sizes)}")
        rows: List[BenchRow] = []
        for n in sizes:
            if n < queries:
                raise ConfigurationError(f"Map size {n} is smaller than the {queries} bench queries")
            config = SynthConfig(q_count=queries, n_count=n, dropout=0.3, drift_amp=1, seed=seed)
            techniques, _ = generate_technique_set(config, Config.BENCH_TECHNIQUES)
            first = techniques.matrix(techniques.ids[0]).values

            candidates_ms, theta_ms, sic_total = self._bench_sic(first, sic)
            seq_total = self._bench_seq(first, seq)
            music_total = self._bench_music(techniques, sic)

            for matcher, stage, samples in (
                ('sic', 'candidates', candidates_ms),
                ('sic', 'theta', theta_ms),
                ('sic', 'total', sic_total),
                ('seqslam', 'total', seq_total),
                ('music', 'total', music_total),
            ):
                rows.append(BenchRow(matcher=matcher, stage=stage, map_size=n,
                                     ms_per_frame=float(np.median(samples))))
            logger.info(
                f"N={n}: SIC {np.median(sic_total):.3f} ms (theta {np.median(theta_ms):.3f}), "
                f"SeqSLAM {np.median(seq_total):.3f} ms, MuSIC {np.median(music_total):.3f} ms per frame",
                "BENCH"
            )
        return rows

    @staticmethod
    def _bench_sic(values: np.ndarray, params: SicParams):
        history = deque(maxlen=params.f + 1)
        candidates_ms, theta_ms, total_ms = [], [], []
        for raw in values:
            t0 = timeit.default_timer()
            row = zscore_row(raw)
            candidates = top_k_candidates(row, params.k)
            t1 = timeit.default_timer()
            history.appendleft(row)
            thetas, _ = candidate_thetas(list(history), candidates, params.w)
            _match_index = int(candidates[thetas == thetas.max()].min())
            t2 = timeit.default_timer()
            candidates_ms.append((t1 - t0) * 1000)
            theta_ms.append((t2 - t1) * 1000)
            total_ms.append((t2 - t0) * 1000)
        return candidates_ms, theta_ms, total_ms

    @staticmethod
    def _bench_seq(values: np.ndarray, params: SeqParams) -> List[float]:
        history = deque(maxlen=params.ds)
        samples = []
        for q, raw in enumerate(values):
            t0 = timeit.default_timer()
            history.appendleft(enhance_row(-raw, params.r_window))
            search_trajectories(list(history), q, params)
            samples.append((timeit.default_timer() - t0) * 1000)
        return samples

    @staticmethod
    def _bench_music(techniques: TechniqueSet, params: SicParams) -> List[float]:
        matcher = StreamingMusic(techniques.ids, params)
        matrices = {tid: techniques.matrix(tid).values for tid in techniques.ids}
        rows, _ = techniques.shape
        samples = []
        for q in range(rows):
            frame = {tid: values[q] for tid, values in matrices.items()}
            t0 = timeit.default_timer()
            matcher.push(frame)
            samples.append((timeit.default_timer() - t0) * 1000)
        return samples

    def write_bench(self, rows: Sequence[BenchRow], out_dir, svg: bool = False) -> List[str]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        df = pd.DataFrame([r.model_dump() for r in rows], columns=['matcher', 'stage', 'map_size', 'ms_per_frame'])
        df.to_csv(out / 'bench.csv', index=False)
        written = ['bench.csv']
        if svg:
            series = {}
            for (matcher, stage), group in df.groupby(['matcher', 'stage'], sort=False):
                series[f"{matcher} {stage}"] = (group['map_size'].tolist(), group['ms_per_frame'].tolist())
            write_svg(svg_line_chart(series, "Per-frame matching time", "map size", "ms per frame", log_x=True),
                      out / 'bench.svg')
            written.append('bench.svg')
        return written


# Global service instance shared by the CLI and the API
matching_service = MatchingService()
