import argparse
import logging
import sys
from datetime import datetime
from pathlib import Path
from typing import Optional, List

import numpy as np

from acgd.demos import record_demonstrations, save_store
from acgd.envs import make_env, RewardConfig
from acgd.rl.network import PolicyNetwork
from acgd.rl.ppo import PolicyActor, evaluate
from common.domain import MethodSpec
from experiment.checkpoint import load_checkpoint
from experiment.config import load_config, ExperimentConfig
from utils.decorators import Decorators

logger = logging.getLogger(__name__)


def _str2bool(value: str) -> bool:
    if value.lower() in ['true', '1', 'yes']:
        return True
    if value.lower() in ['false', '0', 'no', '']:
        return False
    raise argparse.ArgumentTypeError(f"Boolean value expected. Got: {value}")


def make_runner(config: ExperimentConfig, force: bool = False, resume: Optional[Path] = None):
    if config.method_spec is MethodSpec.BC:
        from experiment.behavior_cloning import BehaviorCloningRunner
        return BehaviorCloningRunner(config, force=force, resume=resume)

    from experiment.curriculum import PpoExperimentRunner
    return PpoExperimentRunner(config, force=force, resume=resume)


class ExperimentMain:
    @staticmethod
    def build_parser() -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog='experiment.main')
        parser.add_argument('--log_to_filesystem', action='store', dest='log_to_filesystem', type=_str2bool, default=True)
        subparsers = parser.add_subparsers(dest='command', required=True)

        train = subparsers.add_parser('train')
        train.add_argument('--config', required=True)
        train.add_argument('--method', default=None)
        train.add_argument('--seed', type=int, default=None)
        train.add_argument('--workers', type=int, default=None)
        train.add_argument('--output_dir', default=None)
        train.add_argument('--force', action='store_true')
        train.add_argument('--resume', default=None)

        demos = subparsers.add_parser('record-demos')
        demos.add_argument('--env', required=True)
        demos.add_argument('--count', type=int, default=10)
        demos.add_argument('--seed', type=int, default=0)
        demos.add_argument('--with_actions', action='store_true')
        demos.add_argument('--out', required=True)

        sweep = subparsers.add_parser('sweep')
        sweep.add_argument('--config', required=True)
        sweep.add_argument('--axis', required=True)
        sweep.add_argument('--values', nargs='*', default=[])
        sweep.add_argument('--force', action='store_true')

        compare = subparsers.add_parser('compare')
        compare.add_argument('runs', nargs='+')
        compare.add_argument('--out', required=True)

        evaluate_parser = subparsers.add_parser('eval')
        evaluate_parser.add_argument('--ckpt', required=True)
        evaluate_parser.add_argument('--episodes', type=int, default=50)
        evaluate_parser.add_argument('--seed', type=int, default=0)
        return parser

    @staticmethod
    def configure_logging(command: str, log_to_filesystem: bool) -> None:
        logging_handlers = [
            logging.StreamHandler(stream=sys.stdout),
        ]

        if log_to_filesystem:
            log_filepath = Path('logs') / command
            log_filepath.mkdir(parents=True, exist_ok=True)
            log_filepath /= datetime.now().strftime('%Y-%m-%d %H:%M') + '.log'
            logging_handlers.append(logging.FileHandler(filename=log_filepath, encoding='utf-8', mode='w'))

        logging.basicConfig(
            level=logging.INFO,
            format='%(asctime)s - %(levelname)s - %(message)s',
            handlers=logging_handlers,
            force=True
        )

    @staticmethod
    @Decorators.log_exception
    def train(args) -> Path:
        config = load_config(args.config)
        overrides = {'method': args.method, 'workers': args.workers, 'output_dir': args.output_dir}
        if args.method is not None:
            overrides['method'] = MethodSpec.parse(args.method).value
        if args.seed is not None:
            overrides['seeds'] = [args.seed]
        config = config.with_overrides(**overrides)
        resume = Path(args.resume) if args.resume else None
        return make_runner(config, force=args.force, resume=resume).run()

    @staticmethod
    @Decorators.log_exception
    def record_demos(args) -> Path:
        env = make_env(args.env)
        store = record_demonstrations(env, args.count, args.seed, with_actions=args.with_actions)
        save_store(store, args.out)
        return Path(args.out)

    @staticmethod
    @Decorators.log_exception
    def sweep(args) -> Path:
        from experiment.sweep import sweep, parse_values
        config = load_config(args.config)
        values = parse_values(args.axis, args.values)
        return sweep(config, args.axis, values, lambda cell, force: make_runner(cell, force=force), force=args.force)

    @staticmethod
    @Decorators.log_exception
    def compare(args):
        from experiment.compare import compare
        return compare(args.runs, args.out)

    @staticmethod
    @Decorators.log_exception
    def evaluate(args):
        state, meta = load_checkpoint(args.ckpt)
        env = make_env(meta['env'], reward=RewardConfig(**meta['reward']), max_steps=meta['max_episode_steps'])
        if meta.get('params'):
            env.registry = env.registry.override(meta['params'])

        arch = state['architecture']
        network = PolicyNetwork(arch['obs_dim'], arch['act_dim'], np.random.default_rng(0), arch['hidden_sizes'])
        network.set_flat(state['params'])
        result = evaluate(PolicyActor(network), env, args.episodes, args.seed)
        logger.info(
            f"Checkpoint {args.ckpt} (iteration {state['iteration']}): success rate {result.success_rate:.3f} "
            f"over {result.episodes} episodes, mean successful length {result.mean_success_length:.1f}.")
        return result

    @staticmethod
    def run(argv: Optional[List[str]] = None):
        args = ExperimentMain.build_parser().parse_args(argv)
        ExperimentMain.configure_logging(args.command, args.log_to_filesystem)

        commands = {
            'train': ExperimentMain.train,
            'record-demos': ExperimentMain.record_demos,
            'sweep': ExperimentMain.sweep,
            'compare': ExperimentMain.compare,
            'eval': ExperimentMain.evaluate,
        }
        return commands[args.command](args)


if __name__ == '__main__':
    try:
        ExperimentMain.run()
    except Exception:
        sys.exit(1)
