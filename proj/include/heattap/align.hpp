#pragma once

#include <iosfwd>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "heattap/features.hpp"

namespace heattap {

enum class EditKind { Match, Substitution, Transposition, Omission, Insertion };

std::string to_string(EditKind kind);

/// One step of an alignment script. Positions are -1 where the op does not
/// consume that side. A transposition consumes two characters on each side,
/// starting at the given positions.
struct EditOp {
  EditKind kind;
  int ref_pos = -1;
  int hyp_pos = -1;

  friend bool operator==(const EditOp&, const EditOp&) = default;
};

/// Unit cost of an op (0 for a match).
int op_cost(EditKind kind);
int script_cost(std::span<const EditOp> ops);

/// Restricted edit distance with adjacent transpositions (each character takes
/// part in at most one op).
int edit_distance(std::string_view reference, std::string_view hypothesis);

/// A minimal-cost script turning `reference` into `hypothesis`. Among equal
/// costs the op ending the script is chosen in the order match, substitution,
/// transposition, omission, insertion, then recursively leftwards.
std::vector<EditOp> align_strings(std::string_view reference, std::string_view hypothesis);

/// Reference label of each hypothesis character under `ops`; none for
/// insertions. Transposed characters get the reference character they stand for.
std::vector<std::optional<char>> hypothesis_labels(std::span<const EditOp> ops,
                                                   std::string_view reference,
                                                   std::size_t hypothesis_size);

/// Outcome set for the last hypothesis character over every minimal script.
/// '\0' stands for "inserted". With `free_tail` the final reference character
/// may stay unmatched at no cost.
std::set<char> last_character_outcomes(std::string_view reference, std::string_view hypothesis,
                                       bool free_tail);

enum class EventKind { Tap, Backspace };

struct TypingEvent {
  EventKind kind = EventKind::Tap;
  std::int64_t t_ms = 0;
  std::string user_id;
  std::string prompt_id;
  std::optional<TapSample> tap;  ///< set for taps
  std::optional<KeyId> decoded;  ///< key shown at the time of the tap
};

nlohmann::json event_to_json(const TypingEvent& event);
TypingEvent event_from_json(const nlohmann::json& j);
void write_events_jsonl(std::ostream& out, std::span<const TypingEvent> events);
std::vector<TypingEvent> read_events_jsonl(std::istream& in);

enum class PairSource { Committed, Deleted };

std::string to_string(PairSource source);

struct AlignedPair {
  TapSample tap;
  KeyId reference;
  PairSource source = PairSource::Committed;
};

nlohmann::json pair_to_json(const AlignedPair& pair);
void write_pairs_jsonl(std::ostream& out, std::span<const AlignedPair> pairs);

struct ReplayResult {
  std::vector<AlignedPair> pairs;
  std::vector<std::string> warnings;
};

/// Labels the taps of the final committed text by aligning it to the prompt.
ReplayResult align_committed(std::string_view prompt, std::span<const TypingEvent> events);

/// Labels deleted taps: before each backspace the buffer is aligned with the
/// prompt prefix one character longer than the buffer, and the tap about to be
/// deleted takes its reference character when every minimal alignment agrees.
ReplayResult replay_deleted(std::string_view prompt, std::span<const TypingEvent> events);

/// Both passes for one trial, committed pairs first.
ReplayResult align_trial(std::string_view prompt, std::span<const TypingEvent> events);

/// Keeps pairs whose reference key is a neighbor candidate of the tap.
std::vector<AlignedPair> far_key_filter(const KeyboardLayout& layout,
                                        std::span<const AlignedPair> pairs,
                                        double window_x = 1.5, double window_y = 1.5);

}  // namespace heattap
