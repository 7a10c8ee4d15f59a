#include <algorithm>
#include <sstream>
#include <audita/error.hpp>
#include <audita/ledger.hpp>

namespace audita::ledger {

    using chain::tx_kind;
    using crypto::hash_domain;

    election_oracle::election_oracle(byte_view master_seed):
        _master(master_seed.begin(), master_seed.end())
    {
    }

    digest election_oracle::seed(std::uint64_t epoch) const
    {
        byte_writer w;
        w.u64(epoch);
        return crypto::hash(hash_domain::oracle, { _master, w.bytes() });
    }

    ledger::ledger(const genesis_config &config):
        _oracle { config.master_seed }, _params { config.params }, _creators { config.block_creators },
        _dealer { config.dealer }
    {
        _params.validate();
        if (_creators.empty())
            throw parameter_error("genesis needs at least one block creator");
        block genesis;
        for (const auto &bc: _creators)
            genesis.txs.push_back(transaction::unsigned_genesis(chain::enroll_tx { chain::enroll_role::block_creator, bc }));
        genesis.txs.push_back(transaction::unsigned_genesis(chain::enroll_tx { chain::enroll_role::dealer, _dealer }));
        for (const auto &[who, amount]: config.mints) {
            genesis.txs.push_back(transaction::unsigned_genesis(chain::mint_tx { who, amount }));
            if (_total_minted + amount < _total_minted)
                throw parameter_error("minted supply overflows");
            _total_minted += amount;
            _state.balances[who] += amount;
        }
        _blocks.push_back(std::move(genesis));
    }

    void ledger::_check_join(const state &s, const transaction &tx) const
    {
        const auto &j = std::get<chain::join_tx>(tx.payload);
        if (tx.author != j.node)
            throw rejected_transaction("join must be signed by the joining node");
        if (!tx.signature_valid())
            throw rejected_transaction("join signature does not verify");
        if (s.positions.contains(j.node))
            throw rejected_transaction("node " + j.node.hex() + " already joined");
    }

    void ledger::_check_store(const state &s, const transaction &tx, std::uint64_t pending_debit) const
    {
        const auto &st = std::get<chain::store_tx>(tx.payload);
        if (!tx.signature_valid())
            throw rejected_transaction("store signature does not verify");
        if (st.duration == 0 || st.alpha == 0)
            throw rejected_transaction("store needs positive duration and alpha");
        if (st.alpha % _params.l != 0)
            throw rejected_transaction("alpha=" + std::to_string(st.alpha) + " is not divisible by l="
                + std::to_string(_params.l));
        if (st.alpha > UINT64_MAX / st.duration || st.funds != st.duration * st.alpha)
            throw rejected_transaction("store funds " + std::to_string(st.funds) + " differ from t*alpha");
        const auto bal = s.balances.find(tx.author);
        const std::uint64_t have = bal == s.balances.end() ? 0 : bal->second;
        if (have < pending_debit || have - pending_debit < st.funds)
            throw rejected_transaction("store author balance " + std::to_string(have) + " cannot cover "
                + std::to_string(st.funds));
        protocol::file_public_key fpk;
        try {
            fpk = protocol::file_public_key::deserialize(st.file_key);
        } catch (const error &e) {
            throw rejected_transaction(std::string { "store carries an invalid file key: " } + e.what());
        }
        if (fpk.n() < _params.m)
            throw rejected_transaction("file has fewer than m chunks");
        for (const auto &rec: s.stores)
            if (rec.file.file_id() == fpk.file_id())
                throw rejected_transaction("file already stored");
    }

    void ledger::_check_fault(const state &s, const transaction &tx) const
    {
        const auto &f = std::get<chain::fault_tx>(tx.payload);
        if (tx.author != _dealer)
            throw rejected_transaction("only the dealer may flag a node faulty");
        if (!tx.signature_valid())
            throw rejected_transaction("fault signature does not verify");
        if (!s.positions.contains(f.node))
            throw rejected_transaction("faulty node is not registered");
    }

    void ledger::_apply(state &s, const transaction &tx, std::uint64_t height) const
    {
        std::visit([&](const auto &p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, chain::join_tx>) {
                s.positions.emplace(p.node, s.registry.size());
                s.registry.push_back(p.node);
            } else if constexpr (std::is_same_v<T, chain::store_tx>) {
                store_record rec;
                rec.handle = tx.id();
                rec.file = protocol::file_public_key::deserialize(p.file_key);
                rec.owner = tx.author;
                rec.duration = p.duration;
                rec.alpha = p.alpha;
                rec.escrow = p.funds;
                rec.accepted_height = height;
                s.balances[tx.author] -= p.funds;
                s.stores.push_back(std::move(rec));
            } else if constexpr (std::is_same_v<T, chain::fault_tx>) {
                s.faulty.insert(p.node);
            } else if constexpr (std::is_same_v<T, chain::reward_tx>) {
                const auto it = std::find_if(s.stores.begin(), s.stores.end(),
                    [&](const store_record &r) { return r.handle == p.source; });
                it->escrow -= p.amount;
                it->paid += p.amount;
                s.balances[p.beneficiary] += p.amount;
            }
        }, tx.payload);
    }

    std::uint64_t ledger::submit_join(const transaction &tx)
    {
        if (tx.kind() != tx_kind::join)
            throw rejected_transaction("not a join transaction");
        _check_join(_state, tx);
        std::uint64_t pending_joins = 0;
        for (const auto &p: _pending) {
            if (p.kind() != tx_kind::join)
                continue;
            if (std::get<chain::join_tx>(p.payload).node == std::get<chain::join_tx>(tx.payload).node)
                throw rejected_transaction("node already has a pending join");
            ++pending_joins;
        }
        _pending.push_back(tx);
        return _state.registry.size() + pending_joins;
    }

    digest ledger::submit_store(const transaction &tx)
    {
        if (tx.kind() != tx_kind::store)
            throw rejected_transaction("not a store transaction");
        std::uint64_t pending_debit = 0;
        const auto id = tx.id();
        const auto fk = std::get<chain::store_tx>(tx.payload).file_key;
        for (const auto &p: _pending) {
            if (p.kind() != tx_kind::store)
                continue;
            if (p.id() == id || std::get<chain::store_tx>(p.payload).file_key == fk)
                throw rejected_transaction("file already has a pending store");
            if (p.author == tx.author)
                pending_debit += std::get<chain::store_tx>(p.payload).funds;
        }
        _check_store(_state, tx, pending_debit);
        _pending.push_back(tx);
        return id;
    }

    void ledger::submit_fault(const transaction &tx)
    {
        if (tx.kind() != tx_kind::fault)
            throw rejected_transaction("not a fault transaction");
        _check_fault(_state, tx);
        _pending.push_back(tx);
    }

    const round &ledger::advance_timestamp()
    {
        ++_epoch;
        round r;
        const auto seed = _oracle.seed(_epoch);
        r.idstr = { protocol::select_leader(_creators, seed), seed, _epoch };
        if (!_active.empty())
            r.elected = protocol::elected_set(_active, r.idstr, _params.effective_k(_active.size()));
        _round = std::move(r);
        return *_round;
    }

    std::vector<reward_entry> ledger::_rewards_for(const state &s, std::uint64_t active_size,
        std::span<const sig_public_key> winners) const
    {
        std::vector<reward_entry> out;
        const auto l_eff = _params.effective_l(active_size);
        for (const auto &rec: s.stores) {
            if (rec.escrow == 0)
                continue;
            const auto pay = rec.alpha / _params.l;
            const auto affordable = rec.escrow / pay;
            const auto count = std::min<std::uint64_t>({ l_eff, winners.size(), affordable });
            for (std::uint64_t i = 0; i < count; ++i)
                out.push_back({ winners[i], pay, rec.handle });
        }
        return out;
    }

    std::vector<reward_entry> ledger::expected_rewards(std::span<const sig_public_key> winners) const
    {
        return _rewards_for(_state, _active.size(), winners);
    }

    block ledger::propose_block(const sig_keypair &leader, std::span<const sig_public_key> winners) const
    {
        if (!_round)
            throw parameter_error("no open round");
        block b;
        b.height = _blocks.size();
        b.previous = _blocks.back().id();
        b.epoch = _round->idstr.timestamp;
        b.idstr_digest = _round->idstr.id();
        b.txs = _pending;
        std::uint64_t nonce = _epoch << 24;
        for (const auto &r: expected_rewards(winners))
            b.txs.push_back(transaction::make(chain::reward_tx { r.beneficiary, r.amount, r.source }, leader, nonce++));
        b.sign(leader);
        return b;
    }

    bool ledger::_reject(std::string reason)
    {
        _last_rejection = std::move(reason);
        return false;
    }

    bool ledger::_accept(const block &blk, const identification_string &idstr,
        std::span<const protocol::proof_claim> claims, std::span<const protocol::possession_proof> proofs,
        bool audited)
    {
        if (!_round)
            return _reject("no open round");
        if (idstr != _round->idstr)
            return _reject("bad-idstr");

        std::vector<protocol::file_public_key> files;
        for (const auto *rec: active_files())
            files.push_back(rec->file);
        protocol::extension_context ctx;
        ctx.files = files;
        ctx.registry = _active;
        ctx.block_creators = _creators;
        ctx.expected_seed = _round->idstr.epoch_seed;
        ctx.expected_epoch = _round->idstr.timestamp;
        ctx.expected_height = _blocks.size();
        ctx.previous = _blocks.back().id();
        protocol::rejection verdict;
        try {
            verdict = audited ? protocol::check_extension(ctx, idstr, blk, proofs, _params)
                              : protocol::check_extension_structure(ctx, idstr, blk, claims, _params);
        } catch (const error &e) {
            return _reject(std::string { "extension check failed: " } + e.what());
        }
        if (verdict != protocol::rejection::none)
            return _reject(std::string { protocol::rejection_name(verdict) });

        std::vector<sig_public_key> winners;
        for (const auto &c: claims)
            if (std::find(winners.begin(), winners.end(), c.prover) == winners.end())
                winners.push_back(c.prover);
        const auto expected = _rewards_for(_state, _active.size(), winners);

        state next = _state;
        std::unordered_set<digest> fresh;
        std::size_t reward_index = 0;
        for (const auto &tx: blk.txs) {
            const auto id = tx.id();
            if (_seen_txs.contains(id) || !fresh.insert(id).second)
                return _reject("duplicate transaction " + id.hex());
            try {
                switch (tx.kind()) {
                    case tx_kind::mint:
                    case tx_kind::enroll:
                        return _reject("genesis-only transaction in block");
                    case tx_kind::join:
                        _check_join(next, tx);
                        break;
                    case tx_kind::store:
                        _check_store(next, tx, 0);
                        break;
                    case tx_kind::fault:
                        _check_fault(next, tx);
                        break;
                    case tx_kind::reward: {
                        const auto &r = std::get<chain::reward_tx>(tx.payload);
                        if (reward_index >= expected.size())
                            return _reject("unexpected reward transaction");
                        const auto &want = expected[reward_index++];
                        if (r.beneficiary != want.beneficiary || r.amount != want.amount || r.source != want.source)
                            return _reject("reward transaction does not match the winning provers");
                        if (tx.author != blk.leader || !tx.signature_valid())
                            return _reject("reward not signed by the block leader");
                        break;
                    }
                }
            } catch (const rejected_transaction &e) {
                return _reject(e.what());
            }
            _apply(next, tx, blk.height);
        }
        if (reward_index != expected.size())
            return _reject("block is missing " + std::to_string(expected.size() - reward_index) + " reward transactions");

        _state = std::move(next);
        _seen_txs.merge(fresh);
        std::erase_if(_pending, [&](const transaction &p) { return _seen_txs.contains(p.id()); });
        _blocks.push_back(blk);
        _round.reset();
        _refresh_active();
        _last_rejection.clear();
        return true;
    }

    bool ledger::accept_block(const block &blk, const identification_string &idstr,
        std::span<const protocol::possession_proof> proofs)
    {
        std::vector<protocol::proof_claim> claims;
        claims.reserve(proofs.size());
        for (const auto &p: proofs)
            claims.push_back({ p.prover, p.file_id });
        return _accept(blk, idstr, claims, proofs, true);
    }

    bool ledger::accept_block_unaudited(const block &blk, const identification_string &idstr,
        std::span<const protocol::proof_claim> claims)
    {
        return _accept(blk, idstr, claims, {}, false);
    }

    void ledger::_refresh_active()
    {
        _active.clear();
        for (const auto &n: _state.registry)
            if (!_state.faulty.contains(n))
                _active.push_back(n);
    }

    std::uint64_t ledger::balance(const sig_public_key &node) const
    {
        const auto it = _state.balances.find(node);
        return it == _state.balances.end() ? 0 : it->second;
    }

    std::uint64_t ledger::escrow_remaining(const digest &handle) const
    {
        for (const auto &rec: _state.stores)
            if (rec.handle == handle)
                return rec.escrow;
        return 0;
    }

    std::uint64_t ledger::total_value() const
    {
        std::uint64_t total = 0;
        for (const auto &[_, b]: _state.balances)
            total += b;
        for (const auto &rec: _state.stores)
            total += rec.escrow;
        return total;
    }

    std::optional<std::uint64_t> ledger::registry_position(const sig_public_key &node) const
    {
        const auto it = _state.positions.find(node);
        if (it == _state.positions.end())
            return std::nullopt;
        return it->second;
    }

    bool ledger::is_faulty(const sig_public_key &node) const
    {
        return _state.faulty.contains(node);
    }

    std::vector<const store_record *> ledger::active_files() const
    {
        std::vector<const store_record *> out;
        for (const auto &rec: _state.stores)
            if (rec.escrow > 0)
                out.push_back(&rec);
        return out;
    }

    std::string ledger::export_chain() const
    {
        return ::audita::ledger::export_chain(std::span<const block> { _blocks });
    }

    bool verify_chain(std::span<const block> blocks)
    {
        if (blocks.empty())
            return false;
        const auto &g = blocks.front();
        if (g.height != 0 || g.previous != digest {})
            return false;
        for (const auto &tx: g.txs)
            if (tx.kind() != tx_kind::mint && tx.kind() != tx_kind::enroll)
                return false;
        for (std::size_t i = 1; i < blocks.size(); ++i) {
            const auto &b = blocks[i];
            if (b.height != i || b.previous != blocks[i - 1].id() || !b.signature_valid())
                return false;
            for (const auto &tx: b.txs) {
                if (tx.kind() == tx_kind::mint || tx.kind() == tx_kind::enroll || !tx.signature_valid())
                    return false;
            }
        }
        return true;
    }

    std::string export_chain(std::span<const block> blocks)
    {
        std::string out;
        for (const auto &b: blocks) {
            out += to_hex(b.serialize());
            out += '\n';
        }
        return out;
    }

    std::vector<block> import_chain(std::string_view text)
    {
        std::vector<block> out;
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos)
                end = text.size();
            auto line = text.substr(pos, end - pos);
            if (!line.empty() && line.back() == '\r')
                line.remove_suffix(1);
            if (!line.empty())
                out.push_back(block::deserialize(from_hex(line)));
            pos = end + 1;
        }
        return out;
    }

}
