#include "tsnet/config.hpp"

#include "tsnet/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace tsnet {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

template <class T>
T parse_number(const std::string& key, const std::string& s) {
  T v{};
  const auto t = trim(s);
  auto r = std::from_chars(t.data(), t.data() + t.size(), v);
  if (r.ec != std::errc() || r.ptr != t.data() + t.size()) {
    throw ParseError("config key '" + key + "': cannot parse '" + s + "' as a number");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& s) {
  const auto t = trim(s);
  if (t == "true" || t == "1" || t == "on" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "off" || t == "no") return false;
  throw ParseError("config key '" + key + "': expected a boolean, got '" + s + "'");
}

struct Field {
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

template <class T>
Field number(T Config::*m) {
  return Field{[m](const Config& c) {
                 if constexpr (std::is_floating_point_v<T>) return fmt(c.*m);
                 else return std::to_string(c.*m);
               },
               [m](Config& c, const std::string& v) { c.*m = parse_number<T>("", v); }};
}

Field boolean(bool Config::*m) {
  return Field{[m](const Config& c) { return fmt(c.*m); },
               [m](Config& c, const std::string& v) { c.*m = parse_bool("", v); }};
}

Field text(std::string Config::*m) {
  return Field{[m](const Config& c) { return c.*m; }, [m](Config& c, const std::string& v) { c.*m = trim(v); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"t_obs", number(&Config::t_obs)},
      {"t_pred", number(&Config::t_pred)},
      {"stride", number(&Config::stride)},
      {"k", number(&Config::k)},
      {"c", number(&Config::c)},
      {"xi", number(&Config::xi)},
      {"attention_layers", number(&Config::attention_layers)},
      {"attention_width", number(&Config::attention_width)},
      {"heads", number(&Config::heads)},
      {"gcn_layers", number(&Config::gcn_layers)},
      {"encoder_width", number(&Config::encoder_width)},
      {"decoder_width", number(&Config::decoder_width)},
      {"latent_dim", number(&Config::latent_dim)},
      {"char_embed_width", number(&Config::char_embed_width)},
      {"goal_embed_width", number(&Config::goal_embed_width)},
      {"goal_hidden_width", number(&Config::goal_hidden_width)},
      {"batch_size", number(&Config::batch_size)},
      {"learning_rate", number(&Config::learning_rate)},
      {"lr_decay", number(&Config::lr_decay)},
      {"epochs", number(&Config::epochs)},
      {"seed", number(&Config::seed)},
      {"use_st", boolean(&Config::use_st)},
      {"use_sc", boolean(&Config::use_sc)},
      {"use_ftc", boolean(&Config::use_ftc)},
      {"character_subset",
       Field{[](const Config& c) { return join(c.character_subset); },
             [](Config& c, const std::string& v) { c.character_subset = split_list(v); }}},
      {"kld_direction", text(&Config::kld_direction)},
      {"asymmetric_norm", boolean(&Config::asymmetric_norm)},
      {"per_category_attention", boolean(&Config::per_category_attention)},
      {"loss_norm", text(&Config::loss_norm)},
      {"ftc_space", text(&Config::ftc_space)},
      {"apply_threshold", boolean(&Config::apply_threshold)},
      {"image_width", number(&Config::image_width)},
      {"image_height", number(&Config::image_height)},
      {"categories",
       Field{[](const Config& c) { return join(c.categories); },
             [](Config& c, const std::string& v) { c.categories = split_list(v); }}},
      {"vocab", Field{[](const Config& c) { return join(c.vocab); },
                      [](Config& c, const std::string& v) {
                        std::vector<int> out;
                        for (const auto& s : split_list(v)) out.push_back(parse_number<int>("vocab", s));
                        c.vocab = std::move(out);
                      }}},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw ArgumentError("unknown config key '" + key + "'");
}

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ValidationError("config key '" + key + "': " + what);
}

}  // namespace

void Config::validate() const {
  for (const auto& [key, v] :
       std::initializer_list<std::pair<const char*, int>>{{"t_obs", t_obs},
                                                          {"t_pred", t_pred},
                                                          {"stride", stride},
                                                          {"k", k},
                                                          {"c", c},
                                                          {"attention_width", attention_width},
                                                          {"heads", heads},
                                                          {"gcn_layers", gcn_layers},
                                                          {"encoder_width", encoder_width},
                                                          {"decoder_width", decoder_width},
                                                          {"latent_dim", latent_dim},
                                                          {"char_embed_width", char_embed_width},
                                                          {"goal_embed_width", goal_embed_width},
                                                          {"batch_size", batch_size},
                                                          {"epochs", epochs}}) {
    require(v >= 1, key, "must be >= 1");
  }
  require(goal_hidden_width >= 0, "goal_hidden_width", "must be >= 0");
  require(attention_layers == 1, "attention_layers", "only a single attention layer is supported");
  require(attention_width % heads == 0, "heads", "must divide attention_width");
  require(xi >= 0.0 && xi <= 1.0, "xi", "must lie in [0, 1]");
  require(c >= k, "c", "must be >= k");
  require(learning_rate > 0.0, "learning_rate", "must be > 0");
  require(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay", "must lie in (0, 1]");
  require(kld_direction == "p_q" || kld_direction == "q_p", "kld_direction", "must be p_q or q_p");
  require(loss_norm == "flattened" || loss_norm == "step_mean", "loss_norm", "must be flattened or step_mean");
  require(ftc_space == "trajectory" || ftc_space == "goal", "ftc_space", "must be trajectory or goal");
  require(image_width > 0 && image_height > 0, "image_width", "image dimensions must be > 0");
  require(!categories.empty(), "categories", "at least one category is required");
  require(categories.size() == vocab.size(), "vocab", "needs one size per category");
  for (int v : vocab) require(v >= 1, "vocab", "sizes must be >= 1");
  std::set<std::string> names(categories.begin(), categories.end());
  require(names.size() == categories.size(), "categories", "names must be unique");
  std::set<std::string> subset;
  for (const auto& s : character_subset) {
    require(names.count(s) == 1, "character_subset", "'" + s + "' is not a configured category");
    require(subset.insert(s).second, "character_subset", "'" + s + "' listed twice");
  }
}

CharacterSchema Config::full_schema() const { return CharacterSchema{categories, vocab}; }

CharacterSchema Config::schema() const {
  const auto full = full_schema();
  if (character_subset.empty()) return full;
  std::vector<int> idx;
  for (std::size_t i = 0; i < categories.size(); ++i) {
    if (std::find(character_subset.begin(), character_subset.end(), categories[i]) != character_subset.end()) {
      idx.push_back(static_cast<int>(i));
    }
  }
  return full.subset(idx);
}

std::vector<std::string> Config::keys() const {
  std::vector<std::string> out;
  for (const auto& [name, f] : fields()) out.push_back(name);
  return out;
}

std::string Config::get(const std::string& key) const { return field(key).get(*this); }

void Config::set(const std::string& key, const std::string& value) {
  const Field& f = field(key);
  try {
    f.set(*this, value);
  } catch (const ParseError&) {
    throw ParseError("config key '" + key + "': cannot parse value '" + value + "'");
  }
}

std::map<std::string, std::string> Config::to_map() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, f] : fields()) out[name] = f.get(*this);
  return out;
}

std::string Config::serialize() const {
  std::ostringstream os;
  for (const auto& [name, f] : fields()) os << name << " = " << f.get(*this) << '\n';
  return os.str();
}

bool Config::overridable(const std::string& key) {
  static const std::set<std::string> keys = {"k", "c", "use_ftc", "ftc_space", "seed", "batch_size", "stride"};
  return keys.count(key) == 1;
}

Config parse_config(const std::string& text, Config base) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    try {
      base.set(key, value);
    } catch (const Error& e) {
      throw ParseError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

Config load_config(const std::filesystem::path& path, Config base) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open config " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return parse_config(os.str(), std::move(base));
}

void save_config(const std::filesystem::path& path, const Config& config) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << config.serialize();
}

Config merge_for_evaluation(const Config& checkpoint, const std::map<std::string, std::string>& overrides) {
  Config out = checkpoint;
  for (const auto& [key, value] : overrides) {
    Config probe = checkpoint;
    probe.set(key, value);
    if (probe.get(key) == checkpoint.get(key)) continue;
    if (!Config::overridable(key)) {
      throw CompatibilityError("config key '" + key + "' is " + value + " but the checkpoint was trained with " +
                               checkpoint.get(key));
    }
    out.set(key, value);
  }
  out.validate();
  return out;
}

}  // namespace tsnet
