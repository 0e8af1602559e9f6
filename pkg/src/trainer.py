"""
학습/평가/ablation 실행 모듈

학습 에폭 루프는 LangGraph 워크플로우로 구성됩니다:

  [시작] -> [train_epoch] -> (발산/오류?) -> [종료]
                 ^                 |
                 |                 v
                 |          [refresh_store] -> (오류?) -> [종료]
                 |                 |
                 |                 v
                 +-- (계속) -- [validate] -> (조기 종료 / 최대 에폭 / 오류) -> [종료]

무거운 객체는 TrainingContext에 두고 노드 함수에 인자로 전달합니다.
"""

import dataclasses
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
from langgraph.graph import END, StateGraph

from src.checkpoint import CheckpointManager
from src.config import RunConfig, build_config
from src.context import TrainingContext, run_inference
from src.data import DatasetBundle, load_dataset
from src.entities import (
    DIMENSION_SPATIAL, DIMENSION_TEMPORAL, OUTPUT_FULL, OUTPUT_QUERY_ONLY,
    RESULT_CONTINUE, RESULT_DIVERGED, RESULT_EPOCH_DONE, RESULT_ERROR,
    MetricsReport, TrainResult, TrainState,
)
from src.errors import DivergenceError, RastError
from src.metrics import build_report, compute_metrics, row_for
from src.model import RASTModel
from src.nodes import refresh_store, train_epoch, validate
from src.optim import Adam
from src.predictor import Backbone
from src.store.store import RetrievalStore
from src.tensor import Tensor, no_grad
from src.utils.convert import dumps

logger = logging.getLogger(__name__)


def build_context(config: RunConfig, dataset: DatasetBundle, run_dir: Union[str, Path],
                  backbone: Optional[Backbone] = None, adjacency: Optional[str] = None) -> TrainingContext:
    """
    모델, 저장소, 옵티마이저를 만들고 실행 디렉토리를 준비합니다.

    모델 초기화, 배치 섞기, 드롭아웃은 모두 하나의 시드 난수 생성기를 공유합니다.
    """
    rng = np.random.default_rng(config.seed)
    model = RASTModel(config, dataset.graph, rng=rng, backbone=backbone)
    store = RetrievalStore(config) if config.uses_retrieval else None
    checkpoints = CheckpointManager(run_dir)
    checkpoints.save_config(config)
    checkpoints.save_normalizer(dataset.normalizer)
    run_info = {
        "source": dataset.source,
        "adjacency": adjacency,
        "seed": config.seed,
        "num_nodes": dataset.num_nodes,
    }
    checkpoints.save_json("run", run_info)
    return TrainingContext(
        config=config,
        dataset=dataset,
        model=model,
        store=store,
        optimizer=Adam.from_config(model.parameters(), config),
        rng=rng,
        checkpoints=checkpoints,
        run_info=run_info,
    )


def seed_store(context: TrainingContext) -> None:
    """
    초기 모델의 인코딩으로 두 뱅크를 채웁니다 (콜드 스타트).

    학습 윈도우에서 균등 간격으로 최대 sample_size개 행을 고릅니다.
    """
    store = context.store
    if store is None:
        return
    config, dataset, model = context.config, context.dataset, context.model
    starts = dataset.window_starts("train")
    if len(starts) == 0:
        logger.warning("학습 윈도우가 없어 뱅크를 비워 둔 채 시작합니다")
        return
    count = min(len(starts), max(1, math.ceil(config.sample_size / dataset.num_nodes)))
    chosen = np.unique(starts[np.linspace(0, len(starts) - 1, count).round().astype(np.int64)])

    model.eval()
    spatial, temporal = [], []
    with no_grad():
        for i in range(0, len(chosen), config.batch_size):
            batch = dataset.gather(chosen[i:i + config.batch_size])
            query = model.encode(Tensor(batch.x.astype(model.dtype)))
            spatial.append(query.e_sp.data)
            temporal.append(query.e_tp.data)
    model.train()

    store.seed_banks({
        DIMENSION_SPATIAL: np.concatenate(spatial),
        DIMENSION_TEMPORAL: np.concatenate(temporal),
    }, epoch=0)
    sizes = {name: len(bank) for name, bank in store.banks.items()}
    context.log_event("store_seed", 0, sizes=sizes)
    logger.info(f"초기 뱅크 구성 완료: {sizes}")


def _create_training_graph(context: TrainingContext) -> Any:
    """
    학습 워크플로우 그래프를 생성합니다.

    Args:
        context: 노드들이 공유하는 학습 컨텍스트

    Returns:
        컴파일된 LangGraph 워크플로우
    """
    workflow = StateGraph(TrainState)

    # === 노드 추가 ===
    # 1. train_epoch: 학습 분할 한 바퀴
    workflow.add_node("train_epoch", lambda state: train_epoch(state, context))

    # 2. refresh_store: 갱신 에폭마다 뱅크 갱신과 인덱스 재구성
    workflow.add_node("refresh_store", lambda state: refresh_store(state, context))

    # 3. validate: 검증, 최고 체크포인트 저장, 조기 종료 판단
    workflow.add_node("validate", lambda state: validate(state, context))

    # === 엣지 추가 ===
    workflow.add_conditional_edges(
        "train_epoch",
        lambda state: "refresh_store" if state.get("node_result") == RESULT_EPOCH_DONE else "EXIT",
        {
            "refresh_store": "refresh_store",
            "EXIT": END
        }
    )
    workflow.add_conditional_edges(
        "refresh_store",
        lambda state: "EXIT" if state.get("node_result") == RESULT_ERROR else "validate",
        {
            "validate": "validate",
            "EXIT": END
        }
    )
    workflow.add_conditional_edges(
        "validate",
        lambda state: "train_epoch" if state.get("node_result") == RESULT_CONTINUE else "EXIT",
        {
            "train_epoch": "train_epoch",
            "EXIT": END
        }
    )

    workflow.set_entry_point("train_epoch")
    return workflow.compile()


def _initial_state(config: RunConfig) -> TrainState:
    return {
        "epoch": 0,
        "max_epochs": config.max_epochs,
        "node_result": "",
        "history": [],
        "best_val_mae": None,
        "best_epoch": None,
        "bad_epochs": 0,
        "nonfinite_streak": 0,
        "store_rebuilds": 0,
        "error": None,
    }


def train(config: RunConfig, dataset: DatasetBundle, out_dir: Union[str, Path],
          backbone: Optional[Backbone] = None, adjacency: Optional[str] = None) -> TrainResult:
    """
    학습을 실행하고 최고 체크포인트의 테스트 지표를 반환합니다.

    Raises:
        DivergenceError: 손실이 3 에폭 연속 유한하지 않거나 유한한 검증 값이 한 번도 없을 때
    """
    context = build_context(config, dataset, out_dir, backbone, adjacency)
    seed_store(context)
    graph = _create_training_graph(context)
    logger.info(f"학습 시작: out={out_dir}, epochs={config.max_epochs}, output_type={config.output_type}")

    # 에폭마다 노드 3개를 지나므로 그에 맞춰 재귀 한도를 잡음
    result = graph.invoke(_initial_state(config), config={"recursion_limit": 3 * config.max_epochs + 10})

    context.checkpoints.save_json("history", result["history"])
    context.checkpoints.save_json("events", context.events)
    if result.get("node_result") == RESULT_ERROR:
        if context.failure is not None:
            raise context.failure
        raise RastError(result.get("error") or "학습 중 알 수 없는 오류가 발생했습니다")
    if result.get("node_result") == RESULT_DIVERGED:
        raise DivergenceError(result.get("error"))
    if result.get("best_epoch") is None:
        raise DivergenceError("유한한 검증 값이 한 번도 나오지 않아 체크포인트가 없습니다")

    metrics = evaluate(out_dir, dataset, "test", backbone=backbone)
    logger.info(
        f"학습 종료: best_epoch={result['best_epoch']}, best_val_mae={result['best_val_mae']:.6f}, "
        f"store_rebuilds={result['store_rebuilds']}"
    )
    return {
        "checkpoint_dir": str(out_dir),
        "best_epoch": result["best_epoch"],
        "best_val_mae": result["best_val_mae"],
        "history": result["history"],
        "metrics": metrics,
        "store_rebuilds": result["store_rebuilds"],
    }


def evaluate(checkpoint_dir: Union[str, Path], dataset: Optional[DatasetBundle] = None, split: str = "test",
             backbone: Optional[Backbone] = None, write: bool = True) -> MetricsReport:
    """
    체크포인트를 불러와 분할 하나를 평가합니다. 뱅크에는 쓰지 않습니다.

    Args:
        dataset: None이면 run.json의 데이터 출처로 다시 만듭니다
        write: metrics.json에 결과를 기록할지 여부

    Raises:
        CheckpointError: 파일이 없거나 파라미터 모양이 설정과 맞지 않을 때
    """
    manager = CheckpointManager(checkpoint_dir)
    loaded = manager.load()
    config = loaded.config
    if dataset is None:
        dataset = load_dataset(loaded.run_info["source"], config, loaded.run_info.get("adjacency"))
    if loaded.normalizer is not None and loaded.normalizer.to_dict() != dataset.normalizer.to_dict():
        logger.warning("데이터 정규화 통계가 체크포인트와 달라 체크포인트 값을 사용합니다")
        dataset = dataclasses.replace(dataset, normalizer=loaded.normalizer)

    model = RASTModel(config, dataset.graph, backbone=backbone)
    model.load_state_dict(loaded.params)
    predictions = run_inference(model, loaded.store, dataset, split, config.batch_size)
    if config.rescale:
        pred, target = dataset.denormalize(predictions.pred), predictions.target_raw
    else:
        pred, target = predictions.pred, predictions.target
    rows = compute_metrics(pred, target, config.null_val, mask=predictions.mask)
    report = build_report(split, rows, predictions.samples, predictions.seconds)
    if write:
        metrics = manager.load_json("metrics", {})
        metrics[split] = report
        manager.save_json("metrics", metrics)
    logger.info(f"평가 완료: split={split}, samples={report['samples']}, avg MAE={row_for(report)['mae']:.6f}")
    return report


def ablate(config: RunConfig, dataset: DatasetBundle, out_dir: Union[str, Path],
           seeds: Sequence[int] = (0, 1, 2),
           output_types: Sequence[str] = (OUTPUT_FULL, OUTPUT_QUERY_ONLY)) -> Dict[str, Any]:
    """
    output_type × seed 조합마다 학습하고 테스트 지표와 변형별 중앙값을 기록합니다.

    Returns:
        {"runs": [...], "median": {output_type: {mae, rmse, mape}}}
    """
    out_dir = Path(out_dir)
    runs: List[Dict[str, Any]] = []
    for output_type in output_types:
        for seed in seeds:
            run_config = build_config(config.model_dump(), output_type=output_type, seed=seed)
            run_dir = out_dir / f"{output_type}_seed{seed}"
            logger.info(f"ablation 실행: output_type={output_type}, seed={seed}")
            result = train(run_config, dataset, run_dir)
            avg = row_for(result["metrics"])
            runs.append({
                "output_type": output_type,
                "seed": seed,
                "checkpoint_dir": str(run_dir),
                "mae": avg["mae"],
                "rmse": avg["rmse"],
                "mape": avg["mape"],
            })

    median = {}
    for output_type in output_types:
        selected = [r for r in runs if r["output_type"] == output_type]
        median[output_type] = {
            metric: float(np.median([r[metric] for r in selected])) for metric in ("mae", "rmse", "mape")
        }
    summary = {"runs": runs, "median": median}
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ablation.json").write_text(dumps(summary), encoding="utf-8")
    logger.info(f"ablation 완료: median={median}")
    return summary
