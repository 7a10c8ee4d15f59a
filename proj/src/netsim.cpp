#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>
#include <audita/error.hpp>
#include <audita/kernels.hpp>
#include <audita/netsim.hpp>

namespace audita::netsim {

    using crypto::hash_domain;
    using crypto::sig_keypair;
    using crypto::sig_public_key;

    namespace {
        double unit_interval(const crypto::digest &dg, std::size_t word)
        {
            std::uint64_t x = 0;
            for (std::size_t i = 0; i < 8; ++i)
                x = (x << 8) | dg.bytes[word * 8 + i];
            // (0, 1]: never zero, so log() below is finite.
            return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53;
        }

        struct evaluation {
            bool ok = false;
            std::string outcome;
            // (file index, chunk index) pairs this responder proved.
            std::vector<std::pair<std::size_t, std::uint64_t>> marks;
            std::vector<protocol::possession_proof> proofs;
        };

        class simulator {
        public:
            simulator(const sim_config &cfg, sim_result &res): _cfg { cfg }, _res { res }
            {
            }

            void run();
        private:
            crypto::digest _seed(std::string_view label, std::uint64_t a = 0, std::uint64_t b = 0) const;
            void _make_parties();
            void _make_files();
            double _arrival(std::uint64_t node, std::uint64_t epoch) const;
            std::uint64_t _slot(std::size_t file, std::uint64_t node) const
            {
                return file * _cfg.node_count + node;
            }
            const std::vector<std::uint64_t> &_assignment(std::size_t file, std::uint64_t node);
            const std::unordered_set<std::uint64_t> &_deleted(std::size_t file, std::uint64_t node);
            const protocol::chunk_assignment &_held(std::size_t file, std::uint64_t node);
            std::vector<std::uint64_t> _challenged(std::size_t file, std::uint64_t node,
                const chain::identification_string &idstr);
            void _flag_faulty(std::uint64_t node);
            std::vector<std::size_t> _active_file_indexes() const;
            void _late_join(const late_join &j, std::uint64_t t);
            std::vector<evaluation> _evaluate(std::span<const std::uint64_t> nodes,
                const std::vector<std::size_t> &files, const chain::identification_string &idstr);
            bool _attempt(std::uint64_t t, std::uint64_t attempt);

            const sim_config &_cfg;
            sim_result &_res;
            std::vector<sig_keypair> _node_keys;
            std::vector<sig_keypair> _bc_keys;
            sig_keypair _dealer;
            sig_keypair _user;
            std::unordered_map<sig_public_key, std::uint64_t> _node_of;
            std::unordered_map<sig_public_key, std::size_t> _bc_of;
            std::vector<double> _base_latency;
            std::vector<protocol::file_public_key> _files;
            std::vector<protocol::encoded_file> _encoded;
            std::unordered_map<crypto::digest, std::size_t> _file_of;
            std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> _assign_cache;
            std::unordered_map<std::uint64_t, std::unordered_set<std::uint64_t>> _deleted_cache;
            std::unordered_map<std::uint64_t, protocol::chunk_assignment> _held_cache;
            std::set<std::uint64_t> _flagged;
            std::uint64_t _tx_nonce = 0;
        };

        crypto::digest simulator::_seed(std::string_view label, std::uint64_t a, std::uint64_t b) const
        {
            byte_writer w;
            w.field(_cfg.master_seed);
            w.field(as_bytes(label));
            w.u64(a);
            w.u64(b);
            return crypto::hash(hash_domain::simulation, w.bytes());
        }

        void simulator::_make_parties()
        {
            _node_keys.reserve(_cfg.node_count);
            _base_latency.reserve(_cfg.node_count);
            for (std::uint64_t i = 0; i < _cfg.node_count; ++i) {
                _node_keys.push_back(protocol::sn_keygen(_seed("node", i).bytes));
                _node_of.emplace(_node_keys.back().public_key, i);
                const auto u = unit_interval(_seed("base-latency", i), 0);
                _base_latency.push_back(_cfg.latency_base_ms + _cfg.latency_spread_ms * u);
                _res.node_keys.push_back(_node_keys.back().public_key);
            }
            if (_node_of.size() != _cfg.node_count)
                throw internal_error("node key collision");
            for (std::uint64_t i = 0; i < _cfg.block_creators; ++i) {
                _bc_keys.push_back(protocol::bc_keygen(_seed("block-creator", i).bytes));
                _bc_of.emplace(_bc_keys.back().public_key, i);
            }
            _dealer = crypto::sig_keygen(_seed("dealer").bytes);
            _user = crypto::sig_keygen(_seed("user").bytes);
        }

        void simulator::_make_files()
        {
            const auto &l = _cfg.chunk_size;
            // A ragged tail exercises padding; the chunk count stays n.
            const std::uint64_t byte_length = _cfg.n * l - (l >= 3 ? l / 3 : 0);
            for (std::uint64_t f = 0; f < _cfg.file_count; ++f) {
                byte_writer w;
                w.field(_cfg.file_seed ? *_cfg.file_seed : _cfg.master_seed);
                w.raw(as_bytes("pdp-key"));
                w.u64(f);
                const auto keys = pdp::keygen(_cfg.modulus_bits, crypto::hash(hash_domain::simulation, w.bytes()).bytes);
                if (_cfg.mode == sim_mode::full_crypto) {
                    byte_string content(byte_length);
                    byte_writer cw;
                    cw.raw(w.bytes());
                    cw.raw(as_bytes("content"));
                    crypto::expand(hash_domain::simulation, cw.bytes(), content);
                    _encoded.push_back(protocol::setup(content, _cfg.chunk_size, keys));
                    _files.push_back(_encoded.back().pk);
                } else {
                    protocol::file_public_key fpk;
                    fpk.pdp = keys.pub;
                    fpk.layout = protocol::make_layout(byte_length, _cfg.chunk_size, keys.pub);
                    _files.push_back(std::move(fpk));
                }
                if (_files.back().n() != _cfg.n)
                    throw internal_error("file layout does not produce n chunks");
                _file_of.emplace(_files.back().file_id(), f);
                file_coverage cov;
                cov.file_id = _files.back().file_id();
                cov.proven.assign(_cfg.n, false);
                _res.coverage.push_back(std::move(cov));
            }
        }

        double simulator::_arrival(std::uint64_t node, std::uint64_t epoch) const
        {
            const auto dg = _seed("jitter", node, epoch);
            // Box-Muller from two hash-derived uniforms.
            const double u1 = unit_interval(dg, 0);
            const double u2 = unit_interval(dg, 1);
            const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
            double t = _base_latency[node] + _cfg.jitter_median_ms * std::exp(_cfg.jitter_sigma * z);
            if (const auto *a = _cfg.adversary_for(node); a && a->kind == adversary_kind::outsourcer)
                t += a->extra_latency_ms;
            return t;
        }

        const std::vector<std::uint64_t> &simulator::_assignment(std::size_t file, std::uint64_t node)
        {
            const auto key = _slot(file, node);
            auto it = _assign_cache.find(key);
            if (it == _assign_cache.end())
                it = _assign_cache.emplace(key, protocol::assignment_indexes(_node_keys[node].public_key, _cfg.n, _cfg.m)).first;
            return it->second;
        }

        const std::unordered_set<std::uint64_t> &simulator::_deleted(std::size_t file, std::uint64_t node)
        {
            const auto key = _slot(file, node);
            auto it = _deleted_cache.find(key);
            if (it != _deleted_cache.end())
                return it->second;
            std::unordered_set<std::uint64_t> out;
            const auto *a = _cfg.adversary_for(node);
            if (a && a->kind == adversary_kind::deleter) {
                const auto count = static_cast<std::uint64_t>(std::llround(a->deleted_fraction * static_cast<double>(_cfg.m)));
                if (count > 0) {
                    const auto &assigned = _assignment(file, node);
                    const auto s = _seed("delete", file, node);
                    for (const auto p: crypto::sample_without_replacement(hash_domain::simulation, s.bytes, _cfg.m, count))
                        out.insert(assigned[p]);
                }
            }
            return _deleted_cache.emplace(key, std::move(out)).first->second;
        }

        const protocol::chunk_assignment &simulator::_held(std::size_t file, std::uint64_t node)
        {
            const auto key = _slot(file, node);
            auto it = _held_cache.find(key);
            if (it != _held_cache.end())
                return it->second;
            auto a = protocol::get_chunks(_files[file], _encoded[file], _node_keys[node].public_key, _cfg.m);
            const auto &gone = _deleted(file, node);
            const auto *adv = _cfg.adversary_for(node);
            for (const auto c: gone) {
                if (adv->style == deleter_style::refuse) {
                    a.held.erase(c);
                } else {
                    // Forged content under the original tags.
                    auto &data = a.held.at(c).data;
                    crypto::expand(hash_domain::simulation, _seed("forge", file, c).bytes, data);
                }
            }
            return _held_cache.emplace(key, std::move(a)).first->second;
        }

        std::vector<std::uint64_t> simulator::_challenged(std::size_t file, std::uint64_t node,
            const chain::identification_string &idstr)
        {
            const auto &assigned = _assignment(file, node);
            const auto seed = protocol::challenge_seed(_files[file], _node_keys[node].public_key, idstr);
            std::vector<std::uint64_t> out;
            out.reserve(_cfg.d);
            for (const auto p: pdp::challenge_positions(_cfg.d, assigned.size(), seed))
                out.push_back(assigned[p]);
            return out;
        }

        void simulator::_flag_faulty(std::uint64_t node)
        {
            if (!_flagged.insert(node).second)
                return;
            _res.flagged_faulty.push_back(node);
            const auto tx = chain::transaction::make(chain::fault_tx { _node_keys[node].public_key }, _dealer, _tx_nonce++);
            _res.chain->submit_fault(tx);
        }

        std::vector<std::size_t> simulator::_active_file_indexes() const
        {
            std::vector<std::size_t> out;
            for (const auto *rec: _res.chain->active_files())
                out.push_back(_file_of.at(rec->file.file_id()));
            return out;
        }

        void simulator::_late_join(const late_join &j, std::uint64_t t)
        {
            const auto &keys = _node_keys[j.node];
            _res.chain->submit_join(chain::transaction::make(chain::join_tx { keys.public_key }, keys, _tx_nonce++));
            const auto registry = _res.chain->registry();
            for (const auto f: _active_file_indexes()) {
                for (const auto chunk: _assignment(f, j.node)) {
                    bool served = false;
                    for (const auto &holder_pk: registry) {
                        const auto h = _node_of.at(holder_pk);
                        if (_flagged.contains(h) || _res.chain->is_faulty(holder_pk))
                            continue;
                        const auto &ha = _assignment(f, h);
                        if (std::find(ha.begin(), ha.end(), chunk) == ha.end())
                            continue;
                        const auto *adv = _cfg.adversary_for(h);
                        const bool refuses = adv && (adv->kind == adversary_kind::refuser
                            || (adv->kind == adversary_kind::deleter && _deleted(f, h).contains(chunk)));
                        if (refuses) {
                            _flag_faulty(h);
                            continue;
                        }
                        _res.reserved.push_back({ t, j.node, f, chunk, h });
                        served = true;
                        break;
                    }
                    if (!served)
                        _res.unrecoverable.push_back({ t, j.node, f, chunk });
                }
            }
        }

        std::vector<evaluation> simulator::_evaluate(std::span<const std::uint64_t> nodes,
            const std::vector<std::size_t> &files, const chain::identification_string &idstr)
        {
            std::vector<evaluation> out(nodes.size());
            std::vector<kernels::prove_job> jobs;
            std::vector<std::size_t> job_owner;
            std::vector<std::size_t> job_file;
            for (std::size_t r = 0; r < nodes.size(); ++r) {
                const auto node = nodes[r];
                auto &ev = out[r];
                const auto *adv = _cfg.adversary_for(node);
                if (adv && adv->kind == adversary_kind::refuser) {
                    ev.outcome = "refused";
                    continue;
                }
                ev.ok = true;
                for (const auto f: files) {
                    ++_res.nodes[node].challenges;
                    auto chunks = _challenged(f, node, idstr);
                    if (_cfg.mode == sim_mode::coverage_only && adv && adv->kind == adversary_kind::deleter && ev.ok) {
                        const auto &gone = _deleted(f, node);
                        const bool hit = std::any_of(chunks.begin(), chunks.end(),
                            [&](std::uint64_t c) { return gone.contains(c); });
                        if (hit) {
                            ev.ok = false;
                            ev.outcome = adv->style == deleter_style::refuse ? "data-loss" : "invalid-proof";
                        }
                    }
                    for (const auto c: chunks)
                        ev.marks.emplace_back(f, c);
                    if (_cfg.mode == sim_mode::full_crypto) {
                        jobs.push_back({ &_files[f], &_node_keys[node], &_held(f, node) });
                        job_owner.push_back(r);
                        job_file.push_back(f);
                    }
                }
            }
            if (!jobs.empty()) {
                auto proved = kernels::prove_batch_parallel(jobs, idstr, _cfg.d);
                _res.proofs_generated += jobs.size();
                std::vector<kernels::verify_job> checks;
                std::vector<std::size_t> check_job;
                for (std::size_t i = 0; i < jobs.size(); ++i) {
                    auto &ev = out[job_owner[i]];
                    if (!proved[i].proof) {
                        if (ev.ok)
                            ev.outcome = proved[i].failure;
                        ev.ok = false;
                        continue;
                    }
                    checks.push_back({ jobs[i].file, &*proved[i].proof, _assignment(job_file[i], nodes[job_owner[i]]) });
                    check_job.push_back(i);
                }
                const auto verdicts = kernels::verify_batch_parallel(checks, idstr, _cfg.d);
                _res.proofs_checked += checks.size();
                for (std::size_t c = 0; c < checks.size(); ++c) {
                    const auto i = check_job[c];
                    auto &ev = out[job_owner[i]];
                    if (!verdicts[c]) {
                        if (ev.ok)
                            ev.outcome = "invalid-proof";
                        ev.ok = false;
                    }
                }
                // Proofs are kept in (responder, file) order.
                for (std::size_t i = 0; i < jobs.size(); ++i)
                    if (out[job_owner[i]].ok)
                        out[job_owner[i]].proofs.push_back(std::move(*proved[i].proof));
            }
            for (auto &ev: out)
                if (!ev.ok)
                    ev.marks.clear();
            return out;
        }

        bool simulator::_attempt(std::uint64_t t, std::uint64_t attempt)
        {
            auto &chain = *_res.chain;
            const auto &round = chain.advance_timestamp();
            const auto idstr = round.idstr;
            race_outcome rec;
            rec.timestamp = t;
            rec.epoch = idstr.timestamp;
            rec.attempt = attempt;
            for (const auto &pk: round.elected) {
                const auto id = _node_of.at(pk);
                rec.elected.push_back(id);
                ++_res.nodes[id].elections;
            }

            const auto files = _active_file_indexes();
            std::vector<sig_public_key> winners;
            std::vector<protocol::proof_claim> claims;
            std::vector<protocol::possession_proof> proofs;
            std::vector<std::pair<std::size_t, std::uint64_t>> marks;
            bool enough = true;
            if (!files.empty() && !round.elected.empty()) {
                // Arrival order; ties go to the lexicographically smaller key.
                std::vector<std::pair<double, std::uint64_t>> order;
                for (const auto id: rec.elected)
                    order.emplace_back(_arrival(id, idstr.timestamp), id);
                std::sort(order.begin(), order.end(), [&](const auto &a, const auto &b) {
                    if (a.first != b.first)
                        return a.first < b.first;
                    return _node_keys[a.second].public_key < _node_keys[b.second].public_key;
                });
                const auto needed = chain.params().effective_l(chain.active_registry().size());
                std::size_t p = 0;
                while (winners.size() < needed && p < order.size()) {
                    const auto take = std::min<std::size_t>(needed - winners.size(), order.size() - p);
                    std::vector<std::uint64_t> batch;
                    for (std::size_t i = 0; i < take; ++i)
                        batch.push_back(order[p + i].second);
                    auto evals = _evaluate(batch, files, idstr);
                    for (std::size_t i = 0; i < take; ++i) {
                        const auto node = batch[i];
                        auto &ev = evals[i];
                        race_entry e { node, order[p + i].first, ev.ok ? "won" : ev.outcome };
                        if (ev.ok) {
                            winners.push_back(_node_keys[node].public_key);
                            for (const auto f: files)
                                claims.push_back({ _node_keys[node].public_key, _files[f].file_id() });
                            for (auto &pr: ev.proofs)
                                proofs.push_back(std::move(pr));
                            marks.insert(marks.end(), ev.marks.begin(), ev.marks.end());
                            rec.winners.push_back(node);
                        } else {
                            ++_res.nodes[node].failures;
                            if (ev.outcome == "refused")
                                _flag_faulty(node);
                        }
                        rec.responders.push_back(std::move(e));
                    }
                    p += take;
                }
                for (; p < order.size(); ++p)
                    rec.responders.push_back({ order[p].second, order[p].first, "late" });
                enough = winners.size() == needed;
            }

            if (!enough) {
                rec.rejection = "too few valid proofs";
                _res.log.push_back(std::move(rec));
                return false;
            }
            const auto &leader = _bc_keys[_bc_of.at(idstr.leader)];
            const auto blk = chain.propose_block(leader, winners);
            const bool ok = _cfg.mode == sim_mode::full_crypto ? chain.accept_block(blk, idstr, proofs)
                                                               : chain.accept_block_unaudited(blk, idstr, claims);
            rec.accepted = ok;
            if (ok) {
                for (const auto &[f, c]: marks) {
                    auto &cov = _res.coverage[f];
                    if (!cov.proven[c]) {
                        cov.proven[c] = true;
                        ++cov.proven_count;
                    }
                }
                for (const auto w: rec.winners)
                    ++_res.nodes[w].wins;
            } else {
                rec.rejection = chain.last_rejection();
            }
            _res.log.push_back(std::move(rec));
            return ok;
        }

        void simulator::run()
        {
            _make_parties();
            _make_files();
            _res.nodes.assign(_cfg.node_count, {});

            ledger::genesis_config g;
            const auto oracle_seed = _seed("oracle");
            g.master_seed.assign(oracle_seed.bytes.begin(), oracle_seed.bytes.end());
            for (const auto &bc: _bc_keys)
                g.block_creators.push_back(bc.public_key);
            g.dealer = _dealer.public_key;
            const auto alpha = _cfg.effective_alpha();
            const auto duration = _cfg.effective_duration();
            g.mints.push_back({ _user.public_key, alpha * duration * _cfg.file_count });
            g.params = { _cfg.m, _cfg.d, _cfg.k, _cfg.l };
            _res.chain.emplace(g);
            auto &chain = *_res.chain;

            std::unordered_map<std::uint64_t, std::uint64_t> join_at;
            for (const auto &j: _cfg.late_joins)
                join_at[j.node] = j.timestamp;

            for (std::uint64_t t = 0; t <= _cfg.max_timestamps; ++t) {
                if (t == 0) {
                    for (std::uint64_t i = 0; i < _cfg.node_count; ++i) {
                        const auto it = join_at.find(i);
                        if (it != join_at.end() && it->second > 0)
                            continue;
                        const auto &keys = _node_keys[i];
                        chain.submit_join(chain::transaction::make(chain::join_tx { keys.public_key }, keys, _tx_nonce++));
                    }
                    for (std::size_t f = 0; f < _files.size(); ++f) {
                        chain::store_tx st { _files[f].serialize(), duration, alpha, duration * alpha };
                        chain.submit_store(chain::transaction::make(std::move(st), _user, _tx_nonce++));
                    }
                } else {
                    for (const auto &j: _cfg.late_joins)
                        if (j.timestamp == t)
                            _late_join(j, t);
                }
                bool accepted = false;
                for (std::uint64_t a = 0; a < _cfg.max_retries && !accepted; ++a)
                    accepted = _attempt(t, a);
                if (!accepted)
                    _res.stalled_timestamps.push_back(t);
                for (auto &cov: _res.coverage)
                    cov.history.push_back(static_cast<double>(cov.proven_count) / static_cast<double>(_cfg.n));
            }

            for (std::uint64_t i = 0; i < _cfg.node_count; ++i) {
                _res.nodes[i].rewards = chain.balance(_node_keys[i].public_key);
                _res.total_rewards += _res.nodes[i].rewards;
            }
        }
    }

    sim_result run_simulation(const sim_config &cfg)
    {
        cfg.validate();
        sim_result res;
        simulator sim { cfg, res };
        sim.run();
        return res;
    }

    namespace {
        std::string fixed6(double v)
        {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%.6f", v);
            return buf;
        }
    }

    std::string coverage_csv(const sim_result &r)
    {
        std::string out;
        const bool multi = r.coverage.size() > 1;
        out += multi ? "timestamp,coverage_fraction,file_id\n" : "timestamp,coverage_fraction\n";
        const std::size_t rows = r.coverage.empty() ? 0 : r.coverage.front().history.size();
        for (std::size_t t = 0; t < rows; ++t) {
            for (const auto &cov: r.coverage) {
                out += std::to_string(t);
                out += ',';
                out += fixed6(cov.history[t]);
                if (multi) {
                    out += ',';
                    out += cov.file_id.hex();
                }
                out += '\n';
            }
        }
        return out;
    }

    std::string nodes_csv(const sim_result &r)
    {
        std::string out = "node_id,rewards,failures\n";
        for (std::size_t i = 0; i < r.nodes.size(); ++i)
            out += std::to_string(i) + ',' + std::to_string(r.nodes[i].rewards) + ','
                + std::to_string(r.nodes[i].failures) + '\n';
        return out;
    }

    std::vector<adversary_stats> adversary_report(const sim_config &cfg, const sim_result &r)
    {
        std::vector<adversary_stats> out;
        for (const auto &a: cfg.adversaries) {
            adversary_stats s;
            s.who = a;
            const auto &tally = r.nodes.at(a.node);
            s.rewards = tally.rewards;
            s.reward_share = r.total_rewards == 0 ? 0.0 : static_cast<double>(tally.rewards) / static_cast<double>(r.total_rewards);
            s.challenges = tally.challenges;
            s.failures = tally.failures;
            s.failure_rate = tally.challenges == 0 ? 0.0 : static_cast<double>(tally.failures) / static_cast<double>(tally.challenges);
            s.flagged_faulty = std::find(r.flagged_faulty.begin(), r.flagged_faulty.end(), a.node) != r.flagged_faulty.end();
            out.push_back(s);
        }
        return out;
    }

    std::string summary(const sim_config &cfg, const sim_result &r)
    {
        std::ostringstream o;
        std::size_t accepted = 0;
        for (const auto &e: r.log)
            accepted += e.accepted ? 1 : 0;
        o << "mode            " << (cfg.mode == sim_mode::full_crypto ? "full_crypto" : "coverage_only") << '\n'
          << "n m k d l       " << cfg.n << ' ' << cfg.m << ' ' << cfg.k << ' ' << cfg.d << ' ' << cfg.l << '\n'
          << "nodes files     " << cfg.node_count << ' ' << cfg.file_count << '\n'
          << "timestamps      " << cfg.max_timestamps << '\n'
          << "attempts        " << r.log.size() << '\n'
          << "blocks accepted " << accepted << '\n'
          << "stalled         " << r.stalled_timestamps.size() << '\n'
          << "total rewards   " << r.total_rewards << '\n'
          << "flagged faulty  " << r.flagged_faulty.size() << '\n'
          << "unrecoverable   " << r.unrecoverable.size() << '\n';
        for (std::size_t f = 0; f < r.coverage.size(); ++f) {
            const auto &cov = r.coverage[f];
            const auto cross = crossing(cov.history, 0.9);
            o << "file " << f << "          final " << fixed6(cov.history.empty() ? 0.0 : cov.history.back())
              << "  90% at " << (cross ? std::to_string(*cross) : std::string { "never" })
              << "  analytic 90% at ";
            try {
                o << solve_timestamps_for_coverage(cfg.n, cfg.d, cfg.l, 0.9);
            } catch (const unreachable_target_error &) {
                o << "never";
            }
            o << '\n';
        }
        for (const auto &s: adversary_report(cfg, r)) {
            static constexpr const char *kinds[] = { "outsourcer", "deleter", "refuser" };
            o << "adversary " << s.who.node << ' ' << kinds[static_cast<int>(s.who.kind)]
              << "  share " << fixed6(s.reward_share) << "  failures " << s.failures << '/' << s.challenges
              << (s.flagged_faulty ? "  faulty" : "") << '\n';
        }
        return o.str();
    }

}
