import streamlit as st
import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

# 로깅을 INFO 레벨 메시지로 표시하도록 구성
logging.basicConfig(
    level=logging.INFO,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    datefmt='%Y-%m-%d %H:%M:%S',
    force=True  # 기존 구성 덮어쓰기
)

from src.checkpoint import CheckpointManager, is_checkpoint
from src.errors import RastError
from src.store.snapshot import snapshot_load
from src.utils.paths import get_project_paths

logger = logging.getLogger(__name__)


def list_runs(root: Path) -> List[Path]:
    """root 아래에서 체크포인트 디렉토리를 찾습니다 (root 자신 포함)."""
    if not root.exists():
        return []
    candidates = [root] + sorted(p.parent for p in root.rglob("config.json"))
    seen, runs = set(), []
    for path in candidates:
        if path not in seen and is_checkpoint(path):
            seen.add(path)
            runs.append(path)
    return runs


def history_frame(history: List[Dict]) -> pd.DataFrame:
    """에폭 기록을 학습 손실/검증 MAE 곡선용 표로 변환합니다."""
    frame = pd.DataFrame(history, columns=["epoch", "lr", "horizon", "train_loss", "val_mae", "skipped_steps", "seconds"])
    return frame.set_index("epoch")


def metrics_frame(metrics: Dict[str, Dict]) -> pd.DataFrame:
    rows = []
    for split, report in metrics.items():
        for row in report.get("rows", []):
            rows.append({"split": split, **row})
    return pd.DataFrame(rows, columns=["split", "horizon", "mae", "rmse", "mape", "count"])


def histogram_frame(histogram: Dict[str, List[float]]) -> pd.DataFrame:
    """{"edges", "counts"} 히스토그램을 구간 왼쪽 끝 기준 표로 변환합니다."""
    edges, counts = histogram.get("edges", []), histogram.get("counts", [])
    return pd.DataFrame({"bin": [f"{e:.3g}" for e in edges[:-1]], "count": counts}).set_index("bin")


def configure_page():
    """Streamlit 페이지 설정 구성"""
    st.set_page_config(
        page_title="RAST Dashboard",
        page_icon="📈",
        layout="wide"
    )


def render_sidebar() -> Optional[Path]:
    """사이드바에서 실행 디렉토리를 선택합니다."""
    with st.sidebar:
        st.header("Runs")
        default_root = str(get_project_paths()["runs_dir"])
        root = Path(st.text_input("Run root", value=default_root))
        runs = list_runs(root)
        if not runs:
            st.info("체크포인트 디렉토리가 없습니다. `rast train --out <dir>`로 학습을 먼저 실행해주세요.")
            return None
        labels = [str(p.relative_to(root)) if p != root else "." for p in runs]
        choice = st.selectbox("Checkpoint", labels)
        return runs[labels.index(choice)]


def render_run(run_dir: Path):
    """선택한 실행의 지표, 학습 곡선, 저장소 이벤트, 뱅크 히스토그램 표시"""
    manager = CheckpointManager(run_dir)
    config = manager.load_config()
    run_info = manager.load_json("run", {})

    st.subheader("Run")
    st.json({"output_type": config.output_type, "seed": config.seed, **run_info})

    st.subheader("Metrics")
    metrics = manager.load_json("metrics", {})
    if metrics:
        st.dataframe(metrics_frame(metrics), use_container_width=True)
    else:
        st.info("평가 지표가 아직 없습니다.")

    history = manager.load_history()
    if history:
        st.subheader("Training curves")
        st.line_chart(history_frame(history)[["train_loss", "val_mae"]])

    events = [e for e in manager.load_events() if e.get("event") in ("store_seed", "store_rebuild")]
    if events:
        st.subheader("Store events")
        st.dataframe(pd.DataFrame(events), use_container_width=True)

    st.subheader("Memory banks")
    columns = st.columns(2)
    for column, key in zip(columns, ("spatial_bank", "temporal_bank")):
        path = manager.paths[key]
        with column:
            if not path.exists():
                st.info(f"{path.name} 없음")
                continue
            bank = snapshot_load(path, config)
            summary = bank.summary()
            st.markdown(f"**{summary['dimension']}**: {summary['entries']}개 엔트리, D_r={summary['dim']}")
            if summary["entries"]:
                st.caption("momentum ω")
                st.bar_chart(histogram_frame(summary["momentum_histogram"]))
                st.caption("age (epochs)")
                st.bar_chart(histogram_frame(summary["age_histogram"]))


def main():
    """메인 애플리케이션 흐름"""
    configure_page()
    st.title("📈 RAST Dashboard")
    st.markdown("학습 실행의 지표, 학습 곡선, 저장소 상태를 확인합니다.")

    run_dir = render_sidebar()
    if run_dir is None:
        return
    try:
        render_run(run_dir)
    except RastError as e:
        logger.error(f"실행 디렉토리 로드 중 오류 발생: {e}")
        st.error(f"실행 디렉토리를 읽을 수 없습니다: {e}")


if __name__ == "__main__":
    main()
