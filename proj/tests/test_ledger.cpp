#include <algorithm>
#include <doctest.h>
#include <audita/error.hpp>
#include <audita/ledger.hpp>
#include "fixtures.hpp"
#include "transcript.hpp"

using namespace audita;

namespace {

    // A ledger with two block creators, a funded user and six storage nodes
    // whose joins are already in the chain. The file comes from the shared
    // transcript so provers have real tagged chunks.
    struct world {
        fixture::transcript t = fixture::honest_transcript();
        std::vector<crypto::sig_keypair> creators;
        crypto::sig_keypair dealer = protocol::sn_keygen(fixture::seed(0, "dealer"));
        crypto::sig_keypair user = protocol::sn_keygen(fixture::seed(0, "user"));
        std::optional<ledger::ledger> chain;
        std::uint64_t nonce = 1;

        explicit world(protocol::audit_params params = { 16, 4, 4, 4 }, std::uint64_t minted = 10000,
            std::uint64_t joins = 6)
        {
            ledger::genesis_config g;
            g.master_seed = fixture::seed(0, "ledger-master");
            for (std::uint64_t i = 0; i < 2; ++i) {
                creators.push_back(protocol::bc_keygen(fixture::seed(i, "ledger-bc")));
                g.block_creators.push_back(creators.back().public_key);
            }
            g.dealer = dealer.public_key;
            g.mints = { { user.public_key, minted } };
            g.params = params;
            chain.emplace(g);
            for (std::uint64_t i = 0; i < joins; ++i)
                chain->submit_join(join_tx(t.nodes[i]));
            if (joins > 0)
                REQUIRE(close_empty_round());
        }

        chain::transaction join_tx(const crypto::sig_keypair &node)
        {
            return chain::transaction::make(chain::join_tx { node.public_key }, node, nonce++);
        }

        chain::transaction store_tx(std::uint64_t duration, std::uint64_t alpha, std::uint64_t funds,
            const protocol::file_public_key &fpk)
        {
            return chain::transaction::make(chain::store_tx { fpk.serialize(), duration, alpha, funds }, user, nonce++);
        }

        const crypto::sig_keypair &leader_keys() const
        {
            for (const auto &c: creators)
                if (c.public_key == chain->current_round()->idstr.leader)
                    return c;
            throw parameter_error("leader not found");
        }

        // A round with no provers; only valid while nothing is being audited.
        bool close_empty_round()
        {
            const auto &r = chain->advance_timestamp();
            const auto blk = chain->propose_block(leader_keys(), {});
            return chain->accept_block(blk, r.idstr, {});
        }

        std::vector<crypto::sig_public_key> winners() const
        {
            const auto &r = *chain->current_round();
            const auto l = chain->params().effective_l(chain->active_registry().size());
            return { r.elected.begin(), r.elected.begin() + static_cast<std::ptrdiff_t>(l) };
        }

        std::vector<protocol::possession_proof> proofs_for(std::span<const crypto::sig_public_key> who) const
        {
            std::vector<protocol::possession_proof> out;
            for (const auto *rec: chain->active_files())
                for (const auto &pk: who)
                    out.push_back(protocol::prove(rec->file, t.keys_of(pk), chain->current_round()->idstr,
                        protocol::get_chunks(rec->file, t.file, pk, chain->params().m), chain->params().d));
            return out;
        }

        // One honest audited timestamp.
        bool honest_round()
        {
            chain->advance_timestamp();
            const auto w = winners();
            const auto blk = chain->propose_block(leader_keys(), w);
            return chain->accept_block(blk, chain->current_round()->idstr, proofs_for(w));
        }
    };

}

TEST_SUITE("ledger") {

TEST_CASE("joins define registry order")
{
    world w({ 16, 4, 4, 4 }, 10000, 0);
    CHECK(w.chain->submit_join(w.join_tx(w.t.nodes[0])) == 0);
    CHECK(w.chain->submit_join(w.join_tx(w.t.nodes[1])) == 1);
    CHECK(w.chain->submit_join(w.join_tx(w.t.nodes[2])) == 2);
    CHECK_THROWS_AS(w.chain->submit_join(w.join_tx(w.t.nodes[1])), rejected_transaction);
    REQUIRE(w.close_empty_round());
    for (std::uint64_t i = 0; i < 3; ++i)
        CHECK(w.chain->registry_position(w.t.nodes[i].public_key) == i);
    CHECK_FALSE(w.chain->registry_position(w.t.nodes[3].public_key).has_value());
    CHECK_THROWS_AS(w.chain->submit_join(w.join_tx(w.t.nodes[0])), rejected_transaction);
    // A join must be signed by the node itself.
    const auto forged = chain::transaction::make(chain::join_tx { w.t.nodes[4].public_key }, w.t.nodes[5], 99);
    CHECK_THROWS_AS(w.chain->submit_join(forged), rejected_transaction);
}

TEST_CASE("store escrow is exactly t times alpha")
{
    world w;
    const auto &fpk = w.t.files[0];
    CHECK_THROWS_AS(w.chain->submit_store(w.store_tx(10, 100, 999, fpk)), rejected_transaction);
    CHECK_THROWS_AS(w.chain->submit_store(w.store_tx(10, 100, 1001, fpk)), rejected_transaction);
    // alpha must split evenly across the l = 4 winners.
    CHECK_THROWS_AS(w.chain->submit_store(w.store_tx(10, 102, 1020, fpk)), rejected_transaction);
    CHECK_THROWS_AS(w.chain->submit_store(w.store_tx(1000, 100, 100000, fpk)), rejected_transaction);
    const auto handle = w.chain->submit_store(w.store_tx(10, 100, 1000, fpk));
    CHECK_THROWS_AS(w.chain->submit_store(w.store_tx(20, 100, 2000, fpk)), rejected_transaction);
    CHECK(w.chain->escrow_remaining(handle) == 0);
    REQUIRE(w.close_empty_round());
    CHECK(w.chain->escrow_remaining(handle) == 1000);
    CHECK(w.chain->balance(w.user.public_key) == 9000);
    CHECK(w.chain->total_value() == 10000);
    CHECK_THROWS_AS(w.chain->submit_store(w.store_tx(10, 100, 1000, fpk)), rejected_transaction);
}

TEST_CASE("a store needs a decodable key with at least m chunks")
{
    world w({ 64, 4, 4, 4 });
    CHECK_THROWS_AS(w.chain->submit_store(w.store_tx(10, 100, 1000, w.t.files[0])), rejected_transaction);
    const auto junk = chain::transaction::make(chain::store_tx { byte_string { 1, 2 }, 10, 100, 1000 }, w.user, 5);
    CHECK_THROWS_AS(w.chain->submit_store(junk), rejected_transaction);
}

TEST_CASE("an honest timestamp pays each of l winners alpha / l")
{
    world w;
    const auto handle = w.chain->submit_store(w.store_tx(10, 100, 1000, w.t.files[0]));
    REQUIRE(w.close_empty_round());
    w.chain->advance_timestamp();
    const auto winners = w.winners();
    REQUIRE(winners.size() == 4);
    const auto blk = w.chain->propose_block(w.leader_keys(), winners);
    std::uint64_t rewards = 0;
    for (const auto &tx: blk.txs) {
        if (tx.kind() != chain::tx_kind::reward)
            continue;
        ++rewards;
        const auto &r = std::get<chain::reward_tx>(tx.payload);
        CHECK(r.amount == 25);
        CHECK(r.source == handle);
        CHECK(std::find(winners.begin(), winners.end(), r.beneficiary) != winners.end());
    }
    CHECK(rewards == 4);
    REQUIRE(w.chain->accept_block(blk, w.chain->current_round()->idstr, w.proofs_for(winners)));
    for (const auto &pk: winners)
        CHECK(w.chain->balance(pk) == 25);
    CHECK(w.chain->escrow_remaining(handle) == 900);
    for (const auto &n: w.t.nodes)
        if (std::find(winners.begin(), winners.end(), n.public_key) == winners.end())
            CHECK(w.chain->balance(n.public_key) == 0);
}

TEST_CASE("blocks with wrong or missing rewards are rejected and the round retried")
{
    world w;
    w.chain->submit_store(w.store_tx(10, 100, 1000, w.t.files[0]));
    REQUIRE(w.close_empty_round());
    w.chain->advance_timestamp();
    const auto winners = w.winners();
    const auto proofs = w.proofs_for(winners);
    const auto idstr = w.chain->current_round()->idstr;
    const auto before = w.chain->export_chain();

    auto missing = w.chain->propose_block(w.leader_keys(), winners);
    missing.txs.pop_back();
    missing.sign(w.leader_keys());
    CHECK_FALSE(w.chain->accept_block(missing, idstr, proofs));
    CHECK(w.chain->last_rejection().find("missing 1 reward") != std::string::npos);

    auto stolen = w.chain->propose_block(w.leader_keys(), winners);
    auto &r = std::get<chain::reward_tx>(stolen.txs.back().payload);
    r.beneficiary = w.t.nodes[5].public_key == winners[0] ? w.t.nodes[4].public_key : w.t.nodes[5].public_key;
    stolen.txs.back() = chain::transaction::make(stolen.txs.back().payload, w.leader_keys(), 1);
    stolen.sign(w.leader_keys());
    CHECK_FALSE(w.chain->accept_block(stolen, idstr, proofs));

    auto other_idstr = idstr;
    other_idstr.timestamp += 7;
    CHECK_FALSE(w.chain->accept_block(w.chain->propose_block(w.leader_keys(), winners), other_idstr, proofs));
    CHECK(w.chain->export_chain() == before);

    // The next epoch elects afresh and succeeds.
    CHECK(w.honest_round());
    CHECK(w.chain->total_value() == 10000);
}

TEST_CASE("escrow drains to zero in t timestamps with value conserved")
{
    world w;
    const auto handle = w.chain->submit_store(w.store_tx(10, 100, 1000, w.t.files[0]));
    REQUIRE(w.close_empty_round());
    std::uint64_t paid = 0;
    for (std::uint64_t ts = 0; ts < 10; ++ts) {
        REQUIRE(w.honest_round());
        CHECK(w.chain->total_value() == w.chain->total_minted());
        for (const auto &tx: w.chain->blocks().back().txs)
            if (tx.kind() == chain::tx_kind::reward)
                paid += std::get<chain::reward_tx>(tx.payload).amount;
    }
    CHECK(w.chain->escrow_remaining(handle) == 0);
    CHECK(paid == 1000);
    CHECK(w.chain->active_files().empty());
    std::uint64_t earned = 0;
    for (const auto &n: w.t.nodes)
        earned += w.chain->balance(n.public_key);
    CHECK(earned == 1000);
    // With nothing left to audit the chain still advances, paying nothing.
    REQUIRE(w.close_empty_round());
    CHECK(w.chain->total_value() == 10000);
}

TEST_CASE("a two-winner store drains in exactly t timestamps")
{
    world w({ 16, 4, 4, 2 });
    const auto handle = w.chain->submit_store(w.store_tx(3, 10, 30, w.t.files[0]));
    REQUIRE(w.close_empty_round());
    for (int i = 0; i < 3; ++i)
        REQUIRE(w.honest_round());
    CHECK(w.chain->escrow_remaining(handle) == 0);
}

TEST_CASE("fault transactions come from the dealer and retire the node")
{
    world w;
    const auto victim = w.t.nodes[2].public_key;
    const auto by_user = chain::transaction::make(chain::fault_tx { victim }, w.user, 1);
    CHECK_THROWS_AS(w.chain->submit_fault(by_user), rejected_transaction);
    const auto stranger = protocol::sn_keygen(fixture::seed(77)).public_key;
    CHECK_THROWS_AS(w.chain->submit_fault(chain::transaction::make(chain::fault_tx { stranger }, w.dealer, 2)),
        rejected_transaction);
    w.chain->submit_fault(chain::transaction::make(chain::fault_tx { victim }, w.dealer, 3));
    REQUIRE(w.close_empty_round());
    CHECK(w.chain->is_faulty(victim));
    CHECK(w.chain->active_registry().size() == 5);
    CHECK(std::find(w.chain->active_registry().begin(), w.chain->active_registry().end(), victim)
        == w.chain->active_registry().end());
    CHECK(w.chain->registry().size() == 6);
}

TEST_CASE("oracle seeds are deterministic per epoch")
{
    const ledger::election_oracle a { fixture::seed(1) }, b { fixture::seed(1) }, c { fixture::seed(2) };
    CHECK(a.seed(5) == b.seed(5));
    CHECK(a.seed(5) != a.seed(6));
    CHECK(a.seed(5) != c.seed(5));
}

TEST_CASE("exported chains re-verify and detect tampering")
{
    world w;
    w.chain->submit_store(w.store_tx(10, 100, 1000, w.t.files[0]));
    REQUIRE(w.close_empty_round());
    for (int i = 0; i < 3; ++i)
        REQUIRE(w.honest_round());
    const auto text = w.chain->export_chain();
    const auto blocks = ledger::import_chain(text);
    REQUIRE(blocks.size() == w.chain->blocks().size());
    CHECK(blocks == w.chain->blocks());
    CHECK(ledger::export_chain(blocks) == text);
    CHECK(ledger::verify_chain(blocks));
    for (std::size_t i = 1; i < blocks.size(); ++i) {
        CHECK(blocks[i].height == i);
        CHECK(blocks[i].previous == blocks[i - 1].id());
    }

    auto reordered = blocks;
    std::swap(reordered[2], reordered[3]);
    CHECK_FALSE(ledger::verify_chain(reordered));
    auto edited = blocks;
    std::get<chain::reward_tx>(edited[3].txs.back().payload).amount += 1;
    CHECK_FALSE(ledger::verify_chain(edited));
    auto resigned = blocks;
    resigned[2].epoch += 1;
    resigned[2].sign(w.creators[0]);
    CHECK_FALSE(ledger::verify_chain(resigned));
    CHECK_FALSE(ledger::verify_chain({}));
    CHECK_THROWS_AS(ledger::import_chain("zz\n"), decode_error);
}

TEST_CASE("genesis validates its configuration")
{
    ledger::genesis_config g;
    g.params = { 16, 4, 4, 4 };
    CHECK_THROWS_AS(ledger::ledger { g }, parameter_error);
    g.block_creators.push_back(protocol::bc_keygen(fixture::seed(1)).public_key);
    g.params = { 16, 20, 4, 4 };
    CHECK_THROWS_AS(ledger::ledger { g }, parameter_error);
}

}
