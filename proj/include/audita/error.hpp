#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace audita {

    // Every contract violation surfaces as one of these. what() carries the
    // human-readable detail, kind() a stable machine-parsable tag.
    class error : public std::runtime_error {
    public:
        error(std::string_view kind, const std::string &msg):
            std::runtime_error { msg }, _kind { kind }
        {
        }

        const std::string &kind() const noexcept
        {
            return _kind;
        }
    private:
        std::string _kind;
    };

#define AUDITA_ERROR_KIND(name, tag) \
    struct name : error { \
        explicit name(const std::string &msg): error { tag, msg } {} \
    }

    AUDITA_ERROR_KIND(parameter_error, "parameter");
    AUDITA_ERROR_KIND(decode_error, "decode");
    AUDITA_ERROR_KIND(internal_error, "internal");
    AUDITA_ERROR_KIND(incomplete_input_error, "incomplete-input");
    AUDITA_ERROR_KIND(data_loss_error, "data-loss");
    AUDITA_ERROR_KIND(rejected_transaction, "rejected-transaction");
    AUDITA_ERROR_KIND(unreachable_target_error, "unreachable-target");
    AUDITA_ERROR_KIND(config_error, "config");
    AUDITA_ERROR_KIND(io_error, "io");

#undef AUDITA_ERROR_KIND

}
