#pragma once

#include <string_view>

namespace msnmt {

// Reserved ids shared by every subword vocabulary, in this fixed order.
inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNullId = 4;
inline constexpr int kNumReserved = 5;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kUnkToken = "<unk>";
// Canonical text of a null-filled cell; the ASCII spelling is accepted too.
inline constexpr std::string_view kNullToken = "⟨NULL⟩";
inline constexpr std::string_view kNullTokenAscii = "<NULL>";

inline bool is_null_text(std::string_view s) { return s == kNullToken || s == kNullTokenAscii; }

}  // namespace msnmt
