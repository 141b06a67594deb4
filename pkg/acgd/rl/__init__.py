from acgd.rl.network import PolicyNetwork
from acgd.rl.ppo import PpoConfig, PpoTrainer, PolicyActor, ExpertActor, EvaluationResult, evaluate

__all__ = ['PolicyNetwork', 'PpoConfig', 'PpoTrainer', 'PolicyActor', 'ExpertActor', 'EvaluationResult', 'evaluate']
