#pragma once

#include <cstdint>
#include <vector>
#include <audita/bytes.hpp>
#include <audita/crypto.hpp>
#include <audita/pdp.hpp>

namespace fixture {

    inline audita::byte_string seed(std::uint64_t i, std::string_view tag = "test")
    {
        audita::byte_writer w;
        w.raw(audita::as_bytes(tag));
        w.u64(i);
        return w.bytes();
    }

    // Key generation is the slow part of every PDP test, so a few 1024-bit keys
    // are made once per process and reused.
    inline const audita::pdp::keypair &pdp_keys(std::size_t i)
    {
        static std::vector<audita::pdp::keypair> pool = [] {
            std::vector<audita::pdp::keypair> keys;
            for (std::uint64_t k = 0; k < 4; ++k)
                keys.push_back(audita::pdp::keygen(1024, seed(k, "pdp-fixture")));
            return keys;
        }();
        return pool.at(i % pool.size());
    }

    inline audita::byte_string random_bytes(std::uint64_t i, std::size_t len)
    {
        audita::byte_string out(len);
        audita::crypto::expand(audita::crypto::hash_domain::simulation, seed(i, "bytes"), out);
        return out;
    }

}
