#pragma once

// Synthetic mail traffic for one organisation: a 30-day history of regular
// correspondence (to warm the Mail Graph) followed by one day of traffic in
// which a Bernoulli(prevalence) fraction of emails are BEC attempts.
//
// Benign traffic mostly comes from established correspondents; a share comes
// from first-time senders (newsletters, notifications). Attacks come from
// unknown senders and carry display-name masquerade, homoglyphs or zero-width
// characters on top of request/urgency/credential sentences.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bec/ingest/email.hpp"
#include "bec/mailgraph/mail_graph.hpp"

namespace bec::pipeline {

struct CorpusSpec {
  std::size_t size = 10000;
  double prevalence = 1e-4;
  std::uint64_t seed = 1;
  mailgraph::Day traffic_day = 19800;  // 2024-03-18
  int history_days = 30;
  std::size_t users = 40;
  std::size_t partners = 80;
  double stranger_share = 0.08;  // of benign traffic
};

struct GeneratedEmail {
  std::string name;  // relative path, e.g. "emails/t000001.eml"
  std::string bytes;
  int label = 0;  // 1 = BEC
  std::string kind;
  mailgraph::Day day = 0;
};

struct Corpus {
  std::vector<GeneratedEmail> history;
  std::vector<GeneratedEmail> traffic;
  std::size_t positives() const {
    std::size_t n = 0;
    for (const auto& e : traffic) n += e.label;
    return n;
  }
};

namespace corpus_detail {

inline constexpr const char* kFirst[] = {"anna", "john", "maria", "david", "sarah", "michael", "linda", "peter",
                                         "emma", "james", "olivia", "robert", "sophie", "daniel", "laura", "thomas",
                                         "julia", "mark", "nina", "paul"};
inline constexpr const char* kLast[] = {"smith", "jones", "brown", "miller", "davis", "garcia", "wilson", "moore",
                                        "taylor", "clark", "lewis", "walker", "hall", "young", "king", "wright"};
inline constexpr const char* kPartnerDomains[] = {"northwind.example", "contoso.example", "fabrikam.example",
                                                  "globex.example",    "initech.example", "blueharbor.example",
                                                  "summit.example",    "riverside.example"};
inline constexpr const char* kNewsletterDomains[] = {"news.weekly.example", "updates.saasapp.example",
                                                     "events.conference.example", "offers.travel.example"};
inline constexpr const char* kAttackerDomains[] = {"mailbox-secure.example", "exec-mail.example",
                                                   "freemail.example", "inbox-direct.example"};

inline constexpr const char* kNeutral[] = {
    "Here are the meeting notes from Tuesday.",
    "The team finished the quarterly report last week.",
    "I attached the slides for the budget review.",
    "We reviewed the product roadmap in yesterday's call.",
    "The invoice from Northwind was paid last month.",
    "Our next all-hands meeting is on Friday.",
    "The draft of the onboarding plan looks good to me.",
    "Thanks again for the quick turnaround.",
    "The shipment is scheduled for Thursday.",
    "I shared the document with the whole team.",
    "The training session on security has been recorded.",
    "Looking forward to working with you.",
    "The customer was happy with the demo.",
    "We signed the contract with Contoso.",
    "The survey closes on Wednesday.",
    "Our quarterly review went well.",
    "The office will be closed on Monday for maintenance.",
    "I hope you had a great weekend.",
};
inline constexpr const char* kNewsletter[] = {
    "Our newsletter this month covers the marketing launch.",
    "The webinar recording is now available.",
    "The conference agenda has been published.",
    "Travel deals for the spring season are here.",
    "Sales numbers for the quarter are up eight percent.",
    "The weather forecast for Friday looks great.",
};
inline constexpr const char* kRequest[] = {
    "I need you to get something done for me.",
    "Can you purchase 5 gift cards for a client.",
    "Please process a wire transfer of $12,300 to Globex.",
    "Please pay the attached invoice from Initech.",
    "Update the bank details for Northwind to the new account.",
    "Send me your cell phone number.",
    "Please transfer $23,000 to the account below.",
};
inline constexpr const char* kUrgent[] = {
    "This is urgent.",
    "I need this done in the next hour.",
    "Please make the payment by end of day.",
    "Time is of the essence.",
};
inline constexpr const char* kCredential[] = {
    "Please confirm your password.",
    "Send me the MFA code from your phone.",
    "Reply with your username and password.",
};
// Homoglyph-bearing sentences (Cyrillic а о с е р inside Latin words).
inline constexpr const char* kHomoglyph[] = {
    "You h\xD0\xB0ve a new inv\xD0\xBEi\xD1\x81" "e. Ple\xD0\xB0se make the \xD1\x80\xD0\xB0yment by end of d\xD0\xB0y.",
    "Ple\xD0\xB0se \xD1\x81onfirm the wire tr\xD0\xB0nsfer tod\xD0\xB0y.",
    "Your \xD0\xB0\xD1\x81\xD1\x81ount will be susp\xD0\xB5nded. Ple\xD0\xB0se verify your p\xD0\xB0ssword.",
};

inline const char* pick(std::mt19937_64& rng, const auto& arr) {
  return arr[rng() % std::size(arr)];
}

inline double uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline std::string insert_zero_width(const std::string& word, std::size_t count) {
  static const std::string kZwsp = "\xE2\x80\x8B";
  std::string out;
  std::size_t gaps = word.size() > 1 ? word.size() - 1 : 0;
  for (std::size_t i = 0; i < word.size(); ++i) {
    out.push_back(word[i]);
    if (i + 1 < word.size() && count > 0 && (i % std::max<std::size_t>(1, gaps / count)) == 0) {
      out += kZwsp;
      --count;
    }
  }
  return out;
}

struct Person {
  std::string name;
  std::string address;
};

}  // namespace corpus_detail

inline Corpus generate_corpus(const CorpusSpec& spec) {
  using namespace corpus_detail;
  std::mt19937_64 rng(spec.seed);
  auto person = [&](std::size_t i, const std::string& domain) {
    std::string f = kFirst[i % std::size(kFirst)];
    std::string l = kLast[(i / std::size(kFirst) + i) % std::size(kLast)];
    std::string display = f + " " + l;
    display[0] = static_cast<char>(std::toupper(display[0]));
    display[f.size() + 1] = static_cast<char>(std::toupper(display[f.size() + 1]));
    return Person{display, f + "." + l + std::to_string(i) + "@" + domain};
  };
  std::vector<Person> users, partners;
  for (std::size_t i = 0; i < spec.users; ++i) users.push_back(person(i, "acme.example"));
  for (std::size_t i = 0; i < spec.partners; ++i) {
    partners.push_back(person(i + 7, kPartnerDomains[i % std::size(kPartnerDomains)]));
  }
  // each partner regularly writes to two users
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t p = 0; p < partners.size(); ++p) {
    pairs.emplace_back(p, p % users.size());
    pairs.emplace_back(p, (p * 7 + 3) % users.size());
  }

  std::size_t serial = 0;
  auto make = [&](const Person& from, const Person& to, const std::string& subject, const std::string& body,
                  mailgraph::Day day, const std::string& display_override = {}) {
    ParsedEmail e;
    e.from_display_name = display_override.empty() ? from.name : display_override;
    e.from_address = from.address;
    e.recipients = {to.address};
    e.subject = subject;
    e.body_text = body;
    e.date_epoch = day * 86400 + 8 * 3600 + static_cast<std::int64_t>(rng() % 36000);
    e.headers.push_back({"Message-ID", "<gen" + std::to_string(spec.seed) + "." + std::to_string(++serial) + "@corpus>"});
    return serialize_email(e);
  };

  Corpus corpus;
  // history: every pair exchanges mail on about half of the window's days
  std::size_t h = 0;
  for (int offset = spec.history_days; offset >= 1; --offset) {
    const mailgraph::Day day = spec.traffic_day - offset;
    for (const auto& [p, u] : pairs) {
      if (uniform(rng) >= 0.5) continue;
      std::string body = std::string("Hi ") + users[u].name + ",\n\n" + pick(rng, kNeutral) + " " +
                         pick(rng, kNeutral) + "\n\nBest regards, " + partners[p].name;
      char name[32];
      std::snprintf(name, sizeof name, "history/h%06zu.eml", ++h);
      corpus.history.push_back({name, make(partners[p], users[u], "Update", body, day), 0, "history", day});
    }
  }

  for (std::size_t i = 0; i < spec.size; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "emails/t%06zu.eml", i + 1);
    const mailgraph::Day day = spec.traffic_day;
    if (uniform(rng) < spec.prevalence) {
      const Person& victim = users[rng() % users.size()];
      const Person& exec = users[(rng() % users.size())];
      Person attacker{exec.name, std::string("ceo.office") + std::to_string(rng() % 1000) + "@" +
                                     pick(rng, kAttackerDomains)};
      std::string body, subject, display, kind;
      switch (rng() % 3) {
        case 0:
          kind = "address_masquerade";
          display = exec.name + " " + exec.address;
          subject = "Quick request";
          body = "Good Morning,\nlet me know when you are unoccupied. " + std::string(pick(rng, kRequest)) + "\n\n" +
                 pick(rng, kUrgent) + "\n\nThanks, " + exec.name;
          break;
        case 1:
          kind = "unicode_masquerade";
          subject = "Inv\xD0\xBEi\xD1\x81" "e";
          body = std::string(pick(rng, kHomoglyph)) + " " + pick(rng, kRequest) + "\n\n" + exec.name;
          break;
        default:
          kind = "zero_width_abuse";
          subject = "Account " + insert_zero_width("verification", 4);
          body = "Hello,\n\n" + insert_zero_width("Important", 3) + ": " + pick(rng, kCredential) + " " +
                 pick(rng, kRequest) + "\n\nIT Support";
          break;
      }
      corpus.traffic.push_back({name, make(attacker, victim, subject, body, day, display), 1, kind, day});
    } else if (uniform(rng) < spec.stranger_share) {
      const Person& victim = users[rng() % users.size()];
      Person sender{"Newsletter", std::string("news") + std::to_string(rng() % 100) + "@" +
                                      pick(rng, kNewsletterDomains)};
      std::string body = std::string(pick(rng, kNewsletter)) + " " + pick(rng, kNewsletter) + "\n\nThe team";
      corpus.traffic.push_back({name, make(sender, victim, "Monthly update", body, day), 0, "newsletter", day});
    } else {
      const auto& [p, u] = pairs[rng() % pairs.size()];
      std::string body = std::string("Hi ") + users[u].name + ",\n\n" + pick(rng, kNeutral) + "\n\nRegards, " +
                         partners[p].name;
      corpus.traffic.push_back({name, make(partners[p], users[u], "Follow-up", body, day), 0, "correspondence", day});
    }
  }
  return corpus;
}

}  // namespace bec::pipeline
