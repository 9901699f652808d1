"""Environment families, each paired with value-stability metadata."""

from .bandit import BanditTower, GoToArmPolicy, SweepPolicy, bandit_tower, steps_down, to_bottom
from .mdp_env import (MdpEnvironment, MdpSpec, TablePolicy, mdp_environment, reach_policy,
                      reference_sequence, two_state_mdp)
from .metadata import (BernsteinTail, ClassMember, ConstantAllowance, ExponentialTail,
                       FunctionAllowance, LinearAllowance, LossAllowance, PowerSchedule,
                       ReferenceRewards, SqrtAllowance, ValueStabilityMetadata, ZeroTail,
                       probe_grid, reference_reward_prefix)
from .passive import BernoulliPassive, EventuallyPeriodic, PassiveEnvironment, passive_environment
from .pomdp import HiddenChainEnvironment, pomdp_environment
from .trap import TrapEnvironment, trap_environment

__all__ = [
    "BanditTower", "BernoulliPassive", "BernsteinTail", "ClassMember", "ConstantAllowance",
    "EventuallyPeriodic", "ExponentialTail", "FunctionAllowance", "GoToArmPolicy",
    "HiddenChainEnvironment", "LinearAllowance", "LossAllowance", "MdpEnvironment", "MdpSpec",
    "PassiveEnvironment", "PowerSchedule", "ReferenceRewards", "SqrtAllowance", "SweepPolicy",
    "TablePolicy", "TrapEnvironment", "ValueStabilityMetadata", "ZeroTail", "bandit_tower",
    "mdp_environment", "passive_environment", "pomdp_environment", "probe_grid",
    "reach_policy", "reference_reward_prefix", "reference_sequence", "steps_down", "to_bottom",
    "trap_environment", "two_state_mdp",
]
