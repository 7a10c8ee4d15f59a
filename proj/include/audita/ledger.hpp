#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>
#include <audita/chain.hpp>
#include <audita/protocol.hpp>

// In-memory append-only chain. One writer at a time; readers see only
// accepted state. Escrowed coins are paid out as rewards to the winning
// provers of each accepted block, so balances plus escrows never change after
// genesis.
namespace audita::ledger {

    using chain::block;
    using chain::identification_string;
    using chain::transaction;
    using crypto::digest;
    using crypto::sig_keypair;
    using crypto::sig_public_key;

    // One seed per epoch, derived from a master seed.
    class election_oracle {
    public:
        explicit election_oracle(byte_view master_seed);

        digest seed(std::uint64_t epoch) const;
    private:
        byte_string _master;
    };

    struct genesis_config {
        byte_string master_seed;
        std::vector<sig_public_key> block_creators;
        sig_public_key dealer;
        std::vector<std::pair<sig_public_key, std::uint64_t>> mints;
        protocol::audit_params params;
    };

    struct store_record {
        digest handle;
        protocol::file_public_key file;
        sig_public_key owner;
        std::uint64_t duration = 0;
        std::uint64_t alpha = 0;
        std::uint64_t escrow = 0;
        std::uint64_t accepted_height = 0;
        std::uint64_t paid = 0;
    };

    struct round {
        identification_string idstr;
        std::vector<sig_public_key> elected;
    };

    struct reward_entry {
        sig_public_key beneficiary;
        std::uint64_t amount = 0;
        digest source;
    };

    class ledger {
    public:
        explicit ledger(const genesis_config &config);

        // Pending transactions enter the next accepted block in submission
        // order. Each throws rejected_transaction on an invalid submission.
        std::uint64_t submit_join(const transaction &tx);
        digest submit_store(const transaction &tx);
        void submit_fault(const transaction &tx);

        // Opens the next epoch. A rejected block leaves the epoch open; the
        // caller retries by advancing again.
        const round &advance_timestamp();

        const std::optional<round> &current_round() const noexcept
        {
            return _round;
        }

        // Rewards the block for the open round must carry when the given
        // provers (arrival order) win.
        std::vector<reward_entry> expected_rewards(std::span<const sig_public_key> winners) const;
        block propose_block(const sig_keypair &leader, std::span<const sig_public_key> winners) const;

        bool accept_block(const block &blk, const identification_string &idstr,
            std::span<const protocol::possession_proof> proofs);
        // Coverage-only bookkeeping: the prover set is checked but no PDP
        // proof or proof signature is.
        bool accept_block_unaudited(const block &blk, const identification_string &idstr,
            std::span<const protocol::proof_claim> claims);

        const std::string &last_rejection() const noexcept
        {
            return _last_rejection;
        }

        std::uint64_t balance(const sig_public_key &node) const;
        std::uint64_t escrow_remaining(const digest &handle) const;
        std::uint64_t total_minted() const noexcept
        {
            return _total_minted;
        }
        // Sum of all balances and escrows.
        std::uint64_t total_value() const;

        std::span<const sig_public_key> registry() const noexcept
        {
            return _state.registry;
        }

        const std::vector<sig_public_key> &active_registry() const noexcept
        {
            return _active;
        }

        std::optional<std::uint64_t> registry_position(const sig_public_key &node) const;
        bool is_faulty(const sig_public_key &node) const;
        std::span<const sig_public_key> block_creators() const noexcept
        {
            return _creators;
        }

        const sig_public_key &dealer() const noexcept
        {
            return _dealer;
        }

        // Stores accepted before the next block with escrow left: the files
        // the next block must audit.
        std::vector<const store_record *> active_files() const;
        const std::vector<store_record> &stores() const noexcept
        {
            return _state.stores;
        }

        const protocol::audit_params &params() const noexcept
        {
            return _params;
        }

        const std::vector<block> &blocks() const noexcept
        {
            return _blocks;
        }

        std::uint64_t epoch() const noexcept
        {
            return _epoch;
        }

        const election_oracle &oracle() const noexcept
        {
            return _oracle;
        }

        std::string export_chain() const;
    private:
        struct state {
            std::unordered_map<sig_public_key, std::uint64_t> balances;
            std::vector<store_record> stores;
            std::vector<sig_public_key> registry;
            std::unordered_map<sig_public_key, std::uint64_t> positions;
            std::unordered_set<sig_public_key> faulty;
        };

        void _check_join(const state &s, const transaction &tx) const;
        void _check_store(const state &s, const transaction &tx, std::uint64_t pending_debit) const;
        void _check_fault(const state &s, const transaction &tx) const;
        void _apply(state &s, const transaction &tx, std::uint64_t height) const;
        std::vector<reward_entry> _rewards_for(const state &s, std::uint64_t active_size,
            std::span<const sig_public_key> winners) const;
        bool _accept(const block &blk, const identification_string &idstr,
            std::span<const protocol::proof_claim> claims, std::span<const protocol::possession_proof> proofs,
            bool audited);
        bool _reject(std::string reason);
        void _refresh_active();

        election_oracle _oracle;
        protocol::audit_params _params;
        std::vector<sig_public_key> _creators;
        sig_public_key _dealer;
        std::uint64_t _total_minted = 0;
        state _state;
        std::vector<sig_public_key> _active;
        std::vector<block> _blocks;
        std::vector<transaction> _pending;
        // Kept outside the state so validating a block never copies it.
        std::unordered_set<digest> _seen_txs;
        std::uint64_t _epoch = 0;
        std::optional<round> _round;
        std::string _last_rejection;
    };

    // Re-checks the digest chain, heights, block signatures and every
    // non-genesis transaction signature.
    bool verify_chain(std::span<const block> blocks);

    // One hex-encoded canonical block per line.
    std::string export_chain(std::span<const block> blocks);
    std::vector<block> import_chain(std::string_view text);

}
