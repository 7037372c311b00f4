"""Lockstep simulation of dist-UCRL: M agents, one coordinator, sync at step boundaries."""

from __future__ import annotations

import numpy as np

from .agent import AgentState, agent_step, apply_sync
from .confidence import VisitationCounts
from .coordinator import Coordinator
from .mdp_core import MdpModel, Policy
from .trace import ExperimentTrace
from .transport import Ack, CountsUpload, Network, PolicyBroadcast, SyncRequest


def counts_message(agent: AgentState) -> CountsUpload:
    c = agent.lifetime_counts
    S, A = c.shape
    return CountsUpload(
        agent_id=agent.agent_id,
        n_states=S,
        n_actions=A,
        transition_counts=tuple(c.transition_counts.ravel().tolist()),
        reward_sums=tuple(c.reward_sums.ravel().tolist()),
    )


def counts_from_message(msg: CountsUpload) -> VisitationCounts:
    S, A = msg.n_states, msg.n_actions
    return VisitationCounts(
        np.array(msg.transition_counts, dtype=np.int64).reshape(S, A, S),
        np.array(msg.reward_sums, dtype=float).reshape(S, A),
    )


def sync_round(net: Network, coord: Coordinator, agents: list[AgentState], t: int, requesters, triggers) -> None:
    """One barrier: requests, barrier open, uploads, planning, broadcast, acks."""
    for i in requesters:
        net.agents[i].send(SyncRequest(i, t))
        net.server[i].recv()
    uploads = []
    for j, agent in enumerate(agents):
        net.server[j].send(SyncRequest(j, t))
        net.agents[j].recv()
        net.agents[j].send(counts_message(agent))
        uploads.append(counts_from_message(net.server[j].recv()))
    policy, n_global = coord.synchronize(uploads, t, triggers)
    epoch = coord.ledger.rounds
    S, A = coord.n_states, coord.n_actions
    broadcast = PolicyBroadcast(epoch, S, A, tuple(policy.action_of.tolist()), tuple(n_global.ravel().tolist()))
    for j, agent in enumerate(agents):
        net.server[j].send(broadcast)
        msg = net.agents[j].recv()
        apply_sync(agent, Policy(np.array(msg.policy)), np.array(msg.n_global).reshape(S, A))
        net.agents[j].send(Ack(epoch))
        net.server[j].recv()
    coord.ledger.bytes_exchanged = net.bytes_exchanged


def run_dist_ucrl(
    mdp: MdpModel,
    M: int,
    T: int,
    seed: int,
    transport: str = "inproc",
    host: str = "127.0.0.1",
    port: int = 0,
    epsilon_override: float | None = None,
    clip_rewards: bool = False,
    max_evi_iters: int = 1_000_000,
    start_state: int = 0,
    env_name: str | None = None,
    network: Network | None = None,
) -> ExperimentTrace:
    if M < 1 or T < 1:
        raise ValueError("M and T must be positive")
    S, A = mdp.n_states, mdp.n_actions
    agents = [AgentState.fresh(i, M, S, A, seed, start_state) for i in range(M)]
    coord = Coordinator(S, A, M, epsilon_override, clip_rewards, max_evi_iters)
    own_net = network is None
    net = Network(M, transport, host, port) if own_net else network

    rewards = np.zeros((T, M))
    states = np.zeros((T, M), dtype=np.int64)
    actions = np.zeros((T, M), dtype=np.int64)
    epochs = np.zeros((T, M), dtype=np.int64)
    rounds = np.zeros((T, M), dtype=np.int64)
    try:
        sync_round(net, coord, agents, 1, (), ())
        for t in range(1, T + 1):
            row = t - 1
            for i, agent in enumerate(agents):
                out = agent_step(agent, mdp)
                rewards[row, i] = out.reward
                states[row, i] = out.state
                actions[row, i] = out.action
            epochs[row] = coord.ledger.rounds
            rounds[row] = coord.ledger.rounds
            if t < T:
                requesters = [i for i, agent in enumerate(agents) if agent.sync_requested]
                if requesters:
                    triggers = [(i, int(states[row, i]), int(actions[row, i])) for i in requesters]
                    sync_round(net, coord, agents, t + 1, requesters, triggers)
    finally:
        if own_net:
            net.close()
    return ExperimentTrace(
        algo="dist_ucrl",
        env=env_name or mdp.name,
        M=M,
        T=T,
        seed=seed,
        n_states=S,
        n_actions=A,
        rewards=rewards,
        states=states,
        actions=actions,
        epochs=epochs,
        sync_rounds_cum=rounds,
        ledger=coord.ledger,
    )
