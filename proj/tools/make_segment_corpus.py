#!/usr/bin/env python3
"""Builds the bundled labeled segment corpus (data/segments.tsv).

Sentences come from templated business-mail phrasing: ordinary
correspondence (status updates, scheduling, newsletters, thanks) and the
request patterns of business email compromise (payment and gift-card
requests, time pressure, credential harvesting). Output is deterministic.

Format: text<TAB>cta:0|1<TAB>urg:0|1<TAB>cred:0|1
"""

import argparse
import random

NAMES = ["John", "Maria", "David", "Sarah", "Michael", "Anna", "Peter", "Linda", "James", "Emma",
         "Robert", "Olivia", "Daniel", "Sophie", "Thomas", "Laura", "Mark", "Julia", "Paul", "Nina"]
VENDORS = ["Northwind", "Contoso", "Fabrikam", "Globex", "Initech", "Umbrella Supplies", "Acme Logistics",
           "Blue Harbor", "Summit Partners", "Riverside Print"]
AMOUNTS = ["$4,850", "$12,300", "$9,760.50", "$23,000", "$1,990", "$48,200", "$6,400", "$15,075"]
DAYS = ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday"]
TOPICS = ["the quarterly report", "the budget review", "the onboarding plan", "the product roadmap",
          "the customer survey", "the audit schedule", "the hiring pipeline", "the marketing launch",
          "the vendor contract", "the team offsite", "the security training", "the release notes"]

# --- malicious request patterns ------------------------------------------

CTA = [
    "I need you to get something done for me",
    "I need you to handle a task for me",
    "I need a favor from you",
    "please make the payment to {vendor}",
    "please process a wire transfer of {amount} to {vendor}",
    "can you purchase {n} gift cards for a client",
    "buy {n} Apple gift cards and send me the codes",
    "please pay the attached invoice from {vendor}",
    "kindly settle the outstanding balance of {amount}",
    "send me your cell phone number",
    "reply with your direct number so I can text you",
    "update the bank details for {vendor} to the new account",
    "change the payroll deposit account for {name}",
    "please transfer {amount} to the account below",
    "can you do a quick errand for me",
    "I want you to process a payment",
    "get back to me with the gift card codes",
    "make they payment by end of day",
    "send the funds to the new beneficiary",
    "arrange a payment of {amount} for {vendor}",
    "please purchase the items on the list and email me the receipts",
    "wire {amount} to our new supplier",
    "let me have the card numbers once you have them",
    "handle this payment for me discreetly",
    "approve the transfer to {vendor}",
    "scratch the back of the cards and send me pictures",
]

URGENCY_TAIL = [
    "by end of day", "today", "right now", "immediately", "within the hour", "as soon as possible",
    "before 3pm", "in the next 30 minutes", "before the bank closes", "asap", "before I land",
    "this morning", "urgently",
]

URGENT_STANDALONE = [
    "This is urgent",
    "It is very urgent",
    "Time is of the essence",
    "This cannot wait",
    "I need this done in the next hour",
    "This needs to be completed today without delay",
    "Treat this as top priority",
    "Do not delay on this",
    "I am in a meeting and need this fast",
    "The deadline is in an hour",
    "We are running out of time",
    "Urgent response needed",
]

CRED = [
    "please confirm your password",
    "send me your login credentials",
    "reply with your username and password",
    "verify your account by entering your password",
    "sign in with your email password to keep your mailbox active",
    "share the verification code you just received",
    "send me the MFA code from your phone",
    "provide your VPN login details",
    "confirm your employee ID and password",
    "enter your credentials on the portal to release the message",
    "send the W-2 forms for all staff",
    "send me the social security numbers for the new hires",
    "email me the admin password for the finance system",
    "validate your account details to avoid suspension",
    "send me the one-time passcode",
]

OPENERS = ["", "", "", "Please ", "Kindly ", "{name}, ", "Hi {name}, "]

# --- ordinary correspondence ----------------------------------------------

NEUTRAL = [
    "Here are the meeting notes",
    "Here are the meeting notes from {day}",
    "Thanks for your help with {topic}",
    "The team finished {topic} last week",
    "I attached the slides for {topic}",
    "We reviewed {topic} in yesterday's call",
    "The invoice from {vendor} was paid last month",
    "The payment to {vendor} went through on {day}",
    "{vendor} confirmed the delivery for {day}",
    "Lunch will be served in the main kitchen at noon",
    "The office will be closed on {day} for maintenance",
    "Our next all-hands meeting is on {day}",
    "Congratulations to {name} on the promotion",
    "Welcome {name} to the finance team",
    "The new coffee machine has arrived",
    "Please find the agenda for {day} below",
    "The minutes from the board meeting are in the shared folder",
    "I hope you had a great weekend",
    "It was great to see everyone at the offsite",
    "The printer on the second floor is working again",
    "Our newsletter this month covers {topic}",
    "The parking garage will be repainted next week",
    "The draft of {topic} looks good to me",
    "I will be out of office until {day}",
    "{name} will cover for me while I am away",
    "The training session on {topic} has been recorded",
    "Let me know if you have any questions about {topic}",
    "Feel free to reach out if anything is unclear",
    "The customer was happy with the demo",
    "Sales numbers for the quarter are up eight percent",
    "We signed the contract with {vendor}",
    "The webinar recording is now available",
    "Your password was changed successfully last week",
    "Password policies are explained in the employee handbook",
    "The finance team closes the books on the last business day",
    "The shipment from {vendor} is scheduled for {day}",
    "I shared the document with the whole team",
    "Looking forward to working with you",
    "The conference room booking system has been updated",
    "We are planning the holiday party for December",
    "Please note the new expense categories in the portal",
    "The report summarizes the results of {topic}",
    "Good news, the project is on track",
    "The weather forecast for {day} looks great",
    "Thanks again for the quick turnaround",
    "The fire drill is planned for {day} morning",
    "Attached is the revised version of {topic}",
    "The survey closes on {day}",
    "Our quarterly review went well",
    "The IT team upgraded the laptops over the weekend",
]

NEUTRAL_PREFIX = ["Just a reminder that ", "FYI, ", "As discussed, ", "Quick update: ", "As you may know, ",
                  "For your information, ", "Good news: ", "{name} mentioned that ", "As of {day}, ",
                  "In case you missed it, ", "Heads up: ", "According to {name}, "]
NEUTRAL_SUFFIX = [" for the finance team", " as planned", " according to the schedule", " for the sales team",
                  " in the shared drive", " as mentioned in the last meeting", " this quarter", " for next year",
                  " with {vendor}", " on the intranet", " for the {day} session"]
GREETINGS = ["Good Morning", "Good morning {name}", "Hi {name}", "Hello team", "Dear {name}", "Hello",
             "Hey {name}", "Good afternoon"]
CLOSINGS = ["Thanks, {name}", "Best regards, {name}", "Regards, {name}", "Cheers, {name}", "Thank you",
            "Kind regards", "Sent from my iPhone", "Best, {name}"]
AVAILABILITY = ["Good Morning, let me know when you are unoccupied",
                "Good morning {name}, let me know when you are unoccupied",
                "Are you at your desk",
                "Are you available",
                "Hi {name}, are you around",
                "Let me know when you are free",
                "Do you have a moment",
                "{name}, are you in the office today"]


def fill(rng, template):
    return template.format(name=rng.choice(NAMES), vendor=rng.choice(VENDORS), amount=rng.choice(AMOUNTS),
                           day=rng.choice(DAYS), topic=rng.choice(TOPICS), n=rng.choice([3, 4, 5, 6, 8, 10]))


PROPER_START = set(NAMES) | {v.split()[0] for v in VENDORS} | {"I", "IT"}


def lower_first(s):
    first = s.split()[0].rstrip(",")
    return s if first in PROPER_START else s[0].lower() + s[1:]


def with_opener(opener, base):
    if opener.strip() in ("Please", "Kindly") and base.split()[0].lower() in ("please", "kindly"):
        return base
    return opener + (lower_first(base) if opener.strip() and opener.strip() not in ("Please", "Kindly") else base)


def sentence(s, end="."):
    s = s.strip()
    s = s[0].upper() + s[1:]
    return s + end


def generate(seed, size):
    rng = random.Random(seed)
    rows = {}

    def add(text, cta, urg, cred):
        text = text.replace("\t", " ")
        if text not in rows:
            rows[text] = (cta, urg, cred)

    # the canonical example sentences are always present
    add("I need you to get something done for me.", 1, 0, 0)
    add("Please make the payment by end of day.", 1, 1, 0)
    add("Here are the meeting notes.", 0, 0, 0)
    add("Good Morning, let me know when you are unoccupied.", 0, 0, 0)

    # category quotas keep roughly three neutral segments for every request
    quotas = [
        ("cta", 0.10), ("cta_urgent", 0.07), ("urgent", 0.03), ("cred", 0.05),
        ("neutral", 0.62), ("greeting", 0.05), ("closing", 0.05), ("availability", 0.03),
    ]
    for category, share in quotas:
        target = len(rows) + int(round(share * size))
        attempts = 0
        while len(rows) < target and attempts < size * 200:
            attempts += 1
            opener = fill(rng, rng.choice(OPENERS))
            if category == "cta":
                add(sentence(with_opener(opener, fill(rng, rng.choice(CTA)))), 1, 0, 0)
            elif category == "cta_urgent":
                add(sentence(with_opener(opener, fill(rng, rng.choice(CTA))) + " " + rng.choice(URGENCY_TAIL)), 1, 1, 0)
            elif category == "urgent":
                add(sentence(rng.choice(URGENT_STANDALONE), rng.choice([".", "!"])), 0, 1, 0)
            elif category == "cred":
                urgent = rng.random() < 0.4
                text = with_opener(opener, fill(rng, rng.choice(CRED))) + (" " + rng.choice(URGENCY_TAIL) if urgent else "")
                add(sentence(text), 1, 1 if urgent else 0, 1)
            elif category == "neutral":
                text = fill(rng, rng.choice(NEUTRAL))
                if rng.random() < 0.6:
                    text = fill(rng, rng.choice(NEUTRAL_PREFIX)) + lower_first(text)
                if rng.random() < 0.4:
                    text += fill(rng, rng.choice(NEUTRAL_SUFFIX))
                add(sentence(text, rng.choice([".", ".", "!"])), 0, 0, 0)
            elif category == "greeting":
                add(sentence(fill(rng, rng.choice(GREETINGS)), ","), 0, 0, 0)
            elif category == "closing":
                add(sentence(fill(rng, rng.choice(CLOSINGS)), ""), 0, 0, 0)
            else:
                add(sentence(fill(rng, rng.choice(AVAILABILITY)), rng.choice([".", "?"])), 0, 0, 0)
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=20240501)
    ap.add_argument("--size", type=int, default=6000)
    ap.add_argument("--out", default="data/segments.tsv")
    args = ap.parse_args()
    rows = generate(args.seed, args.size)
    with open(args.out, "w", encoding="utf-8", newline="\n") as f:
        f.write("# labeled segments: text<TAB>cta<TAB>urg<TAB>cred (generated by tools/make_segment_corpus.py)\n")
        for text, (cta, urg, cred) in rows.items():
            f.write(f"{text}\tcta:{cta}\turg:{urg}\tcred:{cred}\n")
    print(f"wrote {len(rows)} segments to {args.out}")


if __name__ == "__main__":
    main()
