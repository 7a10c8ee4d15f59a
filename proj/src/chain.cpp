#include <audita/chain.hpp>
#include <audita/error.hpp>

namespace audita::chain {

    using crypto::hash_domain;

    byte_string identification_string::serialize() const
    {
        byte_writer w;
        w.field(leader.bytes);
        w.field(epoch_seed.bytes);
        w.u64(timestamp);
        return std::move(w).bytes();
    }

    identification_string identification_string::deserialize(byte_view b)
    {
        byte_reader r { b };
        identification_string s;
        s.leader = sig_public_key::decode(r.field());
        s.epoch_seed = digest::from_bytes(r.field());
        s.timestamp = r.u64();
        r.expect_end();
        return s;
    }

    digest identification_string::id() const
    {
        return crypto::hash(hash_domain::block, { as_bytes("idstr"), serialize() });
    }

    namespace {
        void write_payload(byte_writer &w, const tx_payload &p)
        {
            w.u8(static_cast<std::uint8_t>(p.index()));
            std::visit([&](const auto &tx) {
                using T = std::decay_t<decltype(tx)>;
                if constexpr (std::is_same_v<T, mint_tx>) {
                    w.raw(tx.recipient.bytes);
                    w.u64(tx.amount);
                } else if constexpr (std::is_same_v<T, enroll_tx>) {
                    w.u8(static_cast<std::uint8_t>(tx.role));
                    w.raw(tx.key.bytes);
                } else if constexpr (std::is_same_v<T, join_tx>) {
                    w.raw(tx.node.bytes);
                } else if constexpr (std::is_same_v<T, store_tx>) {
                    w.field(tx.file_key);
                    w.u64(tx.duration);
                    w.u64(tx.alpha);
                    w.u64(tx.funds);
                } else if constexpr (std::is_same_v<T, reward_tx>) {
                    w.raw(tx.beneficiary.bytes);
                    w.u64(tx.amount);
                    w.raw(tx.source.bytes);
                } else if constexpr (std::is_same_v<T, fault_tx>) {
                    w.raw(tx.node.bytes);
                }
            }, p);
        }

        sig_public_key read_key(byte_reader &r)
        {
            return sig_public_key::decode(r.raw(crypto::sig_key_size));
        }

        tx_payload read_payload(byte_reader &r)
        {
            switch (static_cast<tx_kind>(r.u8())) {
                case tx_kind::mint: {
                    mint_tx tx;
                    tx.recipient = read_key(r);
                    tx.amount = r.u64();
                    return tx;
                }
                case tx_kind::enroll: {
                    enroll_tx tx;
                    const auto role = r.u8();
                    if (role > 1)
                        throw decode_error("unknown enroll role");
                    tx.role = static_cast<enroll_role>(role);
                    tx.key = read_key(r);
                    return tx;
                }
                case tx_kind::join:
                    return join_tx { read_key(r) };
                case tx_kind::store: {
                    store_tx tx;
                    const auto fk = r.field();
                    tx.file_key.assign(fk.begin(), fk.end());
                    tx.duration = r.u64();
                    tx.alpha = r.u64();
                    tx.funds = r.u64();
                    return tx;
                }
                case tx_kind::reward: {
                    reward_tx tx;
                    tx.beneficiary = read_key(r);
                    tx.amount = r.u64();
                    tx.source = digest::from_bytes(r.raw(crypto::digest_size));
                    return tx;
                }
                case tx_kind::fault:
                    return fault_tx { read_key(r) };
            }
            throw decode_error("unknown transaction kind");
        }
    }

    byte_string transaction::body() const
    {
        byte_writer w;
        write_payload(w, payload);
        w.raw(author.bytes);
        w.u64(nonce);
        return std::move(w).bytes();
    }

    byte_string transaction::serialize() const
    {
        byte_writer w;
        w.raw(body());
        w.raw(sig);
        return std::move(w).bytes();
    }

    transaction transaction::read(byte_reader &r)
    {
        transaction tx;
        tx.payload = read_payload(r);
        tx.author = read_key(r);
        tx.nonce = r.u64();
        const auto s = r.raw(crypto::signature_size);
        std::copy(s.begin(), s.end(), tx.sig.begin());
        return tx;
    }

    digest transaction::id() const
    {
        return crypto::hash(hash_domain::transaction, serialize());
    }

    bool transaction::signature_valid() const
    {
        return crypto::sig_verify(author, body(), sig);
    }

    transaction transaction::make(tx_payload payload, const sig_keypair &author, std::uint64_t nonce)
    {
        transaction tx;
        tx.payload = std::move(payload);
        tx.author = author.public_key;
        tx.nonce = nonce;
        tx.sig = crypto::sign(author.secret_key, tx.body());
        return tx;
    }

    transaction transaction::unsigned_genesis(tx_payload payload)
    {
        transaction tx;
        tx.payload = std::move(payload);
        return tx;
    }

    byte_string block::body() const
    {
        byte_writer w;
        w.u64(height);
        w.raw(previous.bytes);
        w.raw(leader.bytes);
        w.u64(epoch);
        w.raw(idstr_digest.bytes);
        w.u32(static_cast<std::uint32_t>(txs.size()));
        for (const auto &tx: txs)
            w.raw(tx.serialize());
        return std::move(w).bytes();
    }

    byte_string block::serialize() const
    {
        byte_writer w;
        w.raw(body());
        w.raw(sig);
        return std::move(w).bytes();
    }

    block block::deserialize(byte_view b)
    {
        byte_reader r { b };
        block blk;
        blk.height = r.u64();
        blk.previous = digest::from_bytes(r.raw(crypto::digest_size));
        blk.leader = read_key(r);
        blk.epoch = r.u64();
        blk.idstr_digest = digest::from_bytes(r.raw(crypto::digest_size));
        const auto count = r.u32();
        blk.txs.reserve(count);
        for (std::uint32_t i = 0; i < count; ++i)
            blk.txs.push_back(transaction::read(r));
        const auto s = r.raw(crypto::signature_size);
        std::copy(s.begin(), s.end(), blk.sig.begin());
        r.expect_end();
        return blk;
    }

    digest block::id() const
    {
        return crypto::hash(hash_domain::block, serialize());
    }

    bool block::signature_valid() const
    {
        return crypto::sig_verify(leader, body(), sig);
    }

    void block::sign(const sig_keypair &leader_keys)
    {
        leader = leader_keys.public_key;
        sig = crypto::sign(leader_keys.secret_key, body());
    }

}
