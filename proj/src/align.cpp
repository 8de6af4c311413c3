#include "heattap/align.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <unordered_set>

#include "heattap/decoder.hpp"

namespace heattap {

std::string to_string(EditKind kind) {
  switch (kind) {
    case EditKind::Match:
      return "match";
    case EditKind::Substitution:
      return "substitution";
    case EditKind::Transposition:
      return "transposition";
    case EditKind::Omission:
      return "omission";
    case EditKind::Insertion:
      return "insertion";
  }
  return "match";
}

int op_cost(EditKind kind) { return kind == EditKind::Match ? 0 : 1; }

int script_cost(std::span<const EditOp> ops) {
  int cost = 0;
  for (const auto& op : ops) cost += op_cost(op.kind);
  return cost;
}

namespace {

using Table = std::vector<std::vector<int>>;

bool transposable(std::string_view r, std::string_view h, std::size_t i, std::size_t j) {
  // r[i], r[i+1] against h[j], h[j+1]
  return r[i] == h[j + 1] && r[i + 1] == h[j] && r[i] != r[i + 1];
}

/// Prefix costs F[i][j] for r[0,i) vs h[0,j).
Table forward_table(std::string_view r, std::string_view h, bool free_tail) {
  const std::size_t m = r.size(), n = h.size();
  auto omit = [&](std::size_t i) { return free_tail && i + 1 == m ? 0 : 1; };
  Table f(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) f[i][0] = f[i - 1][0] + omit(i - 1);
  for (std::size_t j = 1; j <= n; ++j) f[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= m; ++i)
    for (std::size_t j = 1; j <= n; ++j) {
      int best = f[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1);
      best = std::min(best, f[i - 1][j] + omit(i - 1));
      best = std::min(best, f[i][j - 1] + 1);
      if (i >= 2 && j >= 2 && transposable(r, h, i - 2, j - 2))
        best = std::min(best, f[i - 2][j - 2] + 1);
      f[i][j] = best;
    }
  return f;
}

/// Suffix costs B[i][j] for r[i,m) vs h[j,n).
Table backward_table(std::string_view r, std::string_view h, bool free_tail) {
  const std::size_t m = r.size(), n = h.size();
  auto omit = [&](std::size_t i) { return free_tail && i + 1 == m ? 0 : 1; };
  Table b(m + 1, std::vector<int>(n + 1, 0));
  for (std::size_t i = m; i-- > 0;) b[i][n] = b[i + 1][n] + omit(i);
  for (std::size_t j = n; j-- > 0;) b[m][j] = static_cast<int>(n - j);
  for (std::size_t i = m; i-- > 0;)
    for (std::size_t j = n; j-- > 0;) {
      int best = b[i + 1][j + 1] + (r[i] == h[j] ? 0 : 1);
      best = std::min(best, b[i + 1][j] + omit(i));
      best = std::min(best, b[i][j + 1] + 1);
      if (i + 1 < m && j + 1 < n && transposable(r, h, i, j))
        best = std::min(best, b[i + 2][j + 2] + 1);
      b[i][j] = best;
    }
  return b;
}

}  // namespace

int edit_distance(std::string_view reference, std::string_view hypothesis) {
  return forward_table(reference, hypothesis, false)[reference.size()][hypothesis.size()];
}

std::vector<EditOp> align_strings(std::string_view reference, std::string_view hypothesis) {
  const Table f = forward_table(reference, hypothesis, false);
  std::vector<EditOp> ops;
  std::size_t i = reference.size(), j = hypothesis.size();
  while (i > 0 || j > 0) {
    const int here = f[i][j];
    const int ii = static_cast<int>(i), jj = static_cast<int>(j);
    if (i > 0 && j > 0 && reference[i - 1] == hypothesis[j - 1] && f[i - 1][j - 1] == here) {
      ops.push_back({EditKind::Match, ii - 1, jj - 1});
      --i, --j;
    } else if (i > 0 && j > 0 && reference[i - 1] != hypothesis[j - 1] &&
               f[i - 1][j - 1] + 1 == here) {
      ops.push_back({EditKind::Substitution, ii - 1, jj - 1});
      --i, --j;
    } else if (i >= 2 && j >= 2 && transposable(reference, hypothesis, i - 2, j - 2) &&
               f[i - 2][j - 2] + 1 == here) {
      ops.push_back({EditKind::Transposition, ii - 2, jj - 2});
      i -= 2, j -= 2;
    } else if (i > 0 && f[i - 1][j] + 1 == here) {
      ops.push_back({EditKind::Omission, ii - 1, -1});
      --i;
    } else {
      ops.push_back({EditKind::Insertion, -1, jj - 1});
      --j;
    }
  }
  std::reverse(ops.begin(), ops.end());
  return ops;
}

std::vector<std::optional<char>> hypothesis_labels(std::span<const EditOp> ops,
                                                   std::string_view reference,
                                                   std::size_t hypothesis_size) {
  std::vector<std::optional<char>> labels(hypothesis_size);
  for (const auto& op : ops) {
    switch (op.kind) {
      case EditKind::Match:
      case EditKind::Substitution:
        labels.at(static_cast<std::size_t>(op.hyp_pos)) = reference[op.ref_pos];
        break;
      case EditKind::Transposition:
        labels.at(static_cast<std::size_t>(op.hyp_pos)) = reference[op.ref_pos + 1];
        labels.at(static_cast<std::size_t>(op.hyp_pos + 1)) = reference[op.ref_pos];
        break;
      case EditKind::Omission:
      case EditKind::Insertion:
        break;
    }
  }
  return labels;
}

std::set<char> last_character_outcomes(std::string_view reference, std::string_view hypothesis,
                                       bool free_tail) {
  std::set<char> out;
  const std::size_t m = reference.size(), n = hypothesis.size();
  if (n == 0) return out;
  const Table f = forward_table(reference, hypothesis, free_tail);
  const Table b = backward_table(reference, hypothesis, free_tail);
  const int total = f[m][n];
  for (std::size_t i = 1; i <= m; ++i) {
    const int c = reference[i - 1] == hypothesis[n - 1] ? 0 : 1;
    if (f[i - 1][n - 1] + c + b[i][n] == total) out.insert(reference[i - 1]);
  }
  for (std::size_t i = 0; i <= m; ++i)
    if (f[i][n - 1] + 1 + b[i][n] == total) out.insert('\0');
  if (n >= 2)
    for (std::size_t i = 2; i <= m; ++i)
      if (transposable(reference, hypothesis, i - 2, n - 2) &&
          f[i - 2][n - 2] + 1 + b[i][n] == total)
        out.insert(reference[i - 2]);
  return out;
}

nlohmann::json event_to_json(const TypingEvent& e) {
  nlohmann::json j = {{"kind", e.kind == EventKind::Tap ? "tap" : "backspace"},
                      {"t_ms", e.t_ms},
                      {"user_id", e.user_id},
                      {"prompt_id", e.prompt_id}};
  if (e.kind == EventKind::Tap) {
    nlohmann::json t = tap_to_json(*e.tap);
    t["decoded"] = e.decoded->label();
    j["tap"] = std::move(t);
  }
  return j;
}

TypingEvent event_from_json(const nlohmann::json& j) {
  TypingEvent e;
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "tap") {
      e.kind = EventKind::Tap;
    } else if (kind == "backspace") {
      e.kind = EventKind::Backspace;
    } else {
      throw DataError("unknown event kind '" + kind + "'");
    }
    e.t_ms = j.at("t_ms").get<std::int64_t>();
    e.user_id = j.value("user_id", std::string());
    e.prompt_id = j.value("prompt_id", std::string());
    if (e.kind == EventKind::Tap) {
      const auto& t = j.at("tap");
      e.tap = tap_from_json(t);
      e.decoded = KeyId::from_label(t.at("decoded").get<std::string>());
      if (e.user_id.empty()) e.user_id = e.tap->user_id;
      if (e.prompt_id.empty()) e.prompt_id = e.tap->prompt_id;
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("invalid event: ") + ex.what());
  }
  return e;
}

void write_events_jsonl(std::ostream& out, std::span<const TypingEvent> events) {
  for (const auto& e : events) out << event_to_json(e).dump() << '\n';
}

std::vector<TypingEvent> read_events_jsonl(std::istream& in) {
  std::vector<TypingEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("events line " + std::to_string(line_no) + ": " + ex.what());
    } catch (const DataError& ex) {
      throw DataError("events line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return events;
}

std::string to_string(PairSource source) {
  return source == PairSource::Committed ? "committed" : "deleted";
}

nlohmann::json pair_to_json(const AlignedPair& pair) {
  return {{"tap_ref", tap_ref(pair.tap)},
          {"label", pair.reference.label()},
          {"source", to_string(pair.source)}};
}

void write_pairs_jsonl(std::ostream& out, std::span<const AlignedPair> pairs) {
  for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
}

namespace {

struct BufferEntry {
  const TapSample* tap;
  char ch;
};

std::string buffer_text(const std::vector<BufferEntry>& buffer) {
  std::string s;
  s.reserve(buffer.size());
  for (const auto& b : buffer) s.push_back(b.ch);
  return s;
}

std::string checked_prompt(std::string_view prompt) {
  if (prompt.empty()) throw DataError("empty prompt");
  return to_key_text(prompt);
}

void check_times(std::span<const TypingEvent> events) {
  for (std::size_t i = 1; i < events.size(); ++i)
    if (events[i].t_ms < events[i - 1].t_ms)
      throw DataError("event times decrease at event " + std::to_string(i));
}

/// Replays the log; `on_backspace` sees the buffer before each deletion.
template <typename OnBackspace>
std::vector<BufferEntry> replay(std::span<const TypingEvent> events,
                                std::vector<std::string>& warnings, OnBackspace&& on_backspace) {
  check_times(events);
  std::vector<BufferEntry> buffer;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.kind == EventKind::Tap) {
      if (!e.tap || !e.decoded) throw DataError("tap event without tap payload");
      buffer.push_back({&*e.tap, e.decoded->to_char()});
    } else if (buffer.empty()) {
      warnings.push_back("backspace on empty buffer at event " + std::to_string(i) +
                         " skipped");
    } else {
      on_backspace(buffer);
      buffer.pop_back();
    }
  }
  return buffer;
}

}  // namespace

ReplayResult align_committed(std::string_view prompt, std::span<const TypingEvent> events) {
  const std::string ref = checked_prompt(prompt);
  ReplayResult out;
  const auto buffer = replay(events, out.warnings, [](const auto&) {});
  const std::string hyp = buffer_text(buffer);
  const auto ops = align_strings(ref, hyp);
  const auto labels = hypothesis_labels(ops, ref, hyp.size());
  for (std::size_t j = 0; j < buffer.size(); ++j)
    if (labels[j])
      out.pairs.push_back({*buffer[j].tap, *KeyId::from_char(*labels[j]), PairSource::Committed});
  return out;
}

ReplayResult replay_deleted(std::string_view prompt, std::span<const TypingEvent> events) {
  const std::string ref = checked_prompt(prompt);
  ReplayResult out;
  replay(events, out.warnings, [&](const std::vector<BufferEntry>& buffer) {
    const std::string hyp = buffer_text(buffer);
    const std::size_t len = std::min(hyp.size() + 1, ref.size());
    const bool free_tail = len == hyp.size() + 1;
    const auto outcomes = last_character_outcomes(std::string_view(ref).substr(0, len), hyp,
                                                  free_tail);
    if (outcomes.size() == 1 && *outcomes.begin() != '\0')
      out.pairs.push_back(
          {*buffer.back().tap, *KeyId::from_char(*outcomes.begin()), PairSource::Deleted});
  });
  return out;
}

ReplayResult align_trial(std::string_view prompt, std::span<const TypingEvent> events) {
  ReplayResult out = align_committed(prompt, events);
  std::unordered_set<std::string> committed;
  for (const auto& p : out.pairs) committed.insert(tap_ref(p.tap));
  for (auto& p : replay_deleted(prompt, events).pairs)
    if (!committed.count(tap_ref(p.tap))) out.pairs.push_back(std::move(p));
  return out;
}

std::vector<AlignedPair> far_key_filter(const KeyboardLayout& layout,
                                        std::span<const AlignedPair> pairs, double window_x,
                                        double window_y) {
  std::vector<AlignedPair> kept;
  for (const auto& p : pairs)
    if (candidate_filter(layout, p.tap.centroid, window_x, window_y).test(p.reference.index()))
      kept.push_back(p);
  return kept;
}

}  // namespace heattap
