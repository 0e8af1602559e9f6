"""
명령행 인터페이스

  rast train --config <toml/json> --data <stb|synthetic:spec> --out <dir>
  rast eval --ckpt <dir> --split test
  rast bench-store --sizes 1000,8000
  rast inspect-store --snapshot <file>
  rast ablate --config <toml/json> --data <spec> --out <dir> --seeds 0,1,2

종료 코드: 0 성공, 2 설정 오류, 3 데이터 오류, 4 체크포인트 오류, 5 발산
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from src.bench import bench_store, to_frame
from src.checkpoint import CheckpointManager
from src.config import load_config
from src.data import load_dataset
from src.entities import OUTPUT_TYPES
from src.errors import CheckpointError, ConfigError, DataFormatError, DivergenceError
from src.store.snapshot import snapshot_load
from src.trainer import ablate, evaluate, train
from src.utils.convert import dumps

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_CHECKPOINT = 4
EXIT_DIVERGED = 5


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"정수 목록이 아닙니다: {text}") from e


def _str_list(text: str) -> List[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _overrides(args: argparse.Namespace) -> Dict[str, object]:
    return {
        "seed": getattr(args, "seed", None),
        "output_type": getattr(args, "output_type", None),
        "max_epochs": getattr(args, "epochs", None),
    }


def cmd_train(args: argparse.Namespace) -> int:
    config = load_config(args.config, **_overrides(args))
    dataset = load_dataset(args.data, config, args.adjacency)
    result = train(config, dataset, args.out, adjacency=args.adjacency)
    print(dumps({
        "checkpoint_dir": result["checkpoint_dir"],
        "best_epoch": result["best_epoch"],
        "best_val_mae": result["best_val_mae"],
        "store_rebuilds": result["store_rebuilds"],
        "metrics": result["metrics"],
    }))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    dataset = None
    if args.data is not None:
        config = CheckpointManager(args.ckpt).load_config()
        dataset = load_dataset(args.data, config, args.adjacency)
    print(dumps(evaluate(args.ckpt, dataset, args.split)))
    return EXIT_OK


def cmd_bench_store(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    rows = bench_store(args.sizes, config, k=args.k, dim=args.dim, clusters=args.clusters,
                       num_queries=args.queries, seed=args.seed, out_csv=args.out)
    if args.out is None:
        print(to_frame(rows).to_csv(index=False), end="")
    return EXIT_OK


def cmd_inspect_store(args: argparse.Namespace) -> int:
    bank = snapshot_load(args.snapshot)
    print(dumps(bank.summary(bins=args.bins)))
    return EXIT_OK


def cmd_ablate(args: argparse.Namespace) -> int:
    config = load_config(args.config, max_epochs=args.epochs)
    dataset = load_dataset(args.data, config, args.adjacency)
    print(dumps(ablate(config, dataset, args.out, seeds=args.seeds, output_types=args.output_types)))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rast", description="검색 증강 시공간 예측")
    parser.add_argument("-v", "--verbose", action="store_true", help="DEBUG 로그 출력")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="모델 학습")
    p.add_argument("--config", default=None, help="TOML/JSON 설정 파일")
    p.add_argument("--data", required=True, help="STB 파일 또는 synthetic:<kind>?N=..&T=..")
    p.add_argument("--adjacency", default=None, help="인접 CSV (STB 전용)")
    p.add_argument("--out", required=True, help="체크포인트 디렉토리")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output-type", choices=OUTPUT_TYPES, default=None)
    p.add_argument("--epochs", type=int, default=None, help="max_epochs 덮어쓰기")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("eval", help="체크포인트 평가")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--split", choices=("train", "val", "test"), default="test")
    p.add_argument("--data", default=None, help="지정하지 않으면 run.json의 데이터 출처 사용")
    p.add_argument("--adjacency", default=None)
    p.set_defaults(handler=cmd_eval)

    p = sub.add_parser("bench-store", help="Flat/IVF 검색 벤치마크")
    p.add_argument("--sizes", type=_int_list, default=[1000, 8000])
    p.add_argument("--config", default=None)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--dim", type=int, default=32)
    p.add_argument("--clusters", type=int, default=10)
    p.add_argument("--queries", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="CSV 경로 (없으면 표준 출력)")
    p.set_defaults(handler=cmd_bench_store)

    p = sub.add_parser("inspect-store", help="뱅크 스냅샷 요약")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--bins", type=int, default=10)
    p.set_defaults(handler=cmd_inspect_store)

    p = sub.add_parser("ablate", help="output_type × seed ablation")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True)
    p.add_argument("--adjacency", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=_int_list, default=[0, 1, 2])
    p.add_argument("--output-types", type=_str_list, default=["full", "query_only"])
    p.add_argument("--epochs", type=int, default=None)
    p.set_defaults(handler=cmd_ablate)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except ConfigError as e:
        logger.error(f"설정 오류: {e}")
        return EXIT_CONFIG
    except DataFormatError as e:
        logger.error(f"데이터 오류: {e}")
        return EXIT_DATA
    except CheckpointError as e:
        logger.error(f"체크포인트 오류: {e}")
        return EXIT_CHECKPOINT
    except DivergenceError as e:
        logger.error(f"학습 발산: {e}")
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
