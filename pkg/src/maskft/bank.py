"""Word pools and sentence frames for synthetic fictitious-entity corpora."""

from __future__ import annotations

from dataclasses import dataclass

FIRST_NAMES = (
    "Daphne Uriah Lucas Owen Curtis Mabel Tobias Selma Anton Greta Hugo Ines Jasper Kira Leon Maren "
    "Nolan Odile Pavel Quinn Rosalind Silas Tamsin Ulric Vera Wendell Xenia Yusuf Zelda Amos Briony "
    "Cyrus Delphine Emrys Fenna Gideon Hester Ivo Juno Kasimir Lorna Magnus Nerys Orrin Petra Rufus "
    "Sabine Thaddeus Una Viggo Willa Alaric Beatrix Cormac Dagny Elio Freya Gaspard Honor Idris "
    "Jolene Kester Linnea Milo Noor Osric Perpetua Reuben Solveig Tybalt Ursula Vesna Wolfram Ysolde "
    "Zoltan Anselm Bettina Caspian Dorit Ezra Flavia"
).split()

LAST_NAMES = (
    "Barrington Hawthorne Rainford Pavy Emley Ashcombe Blackwood Corrigan Davenport Ellery Fairweather "
    "Gallagher Holloway Ingram Jessop Kingsley Lockhart Merriweather Northcott Oakes Pemberton Quayle "
    "Radcliffe Stanhope Thistlewood Underhill Vance Whitlock Yardley Zeller Abernathy Birchall Cavendish "
    "Dunmore Everhart Fenwick Grimsby Harrowgate Islington Jarvis Kettering Langley Moorcroft Netherby "
    "Ormsby Prescott Ravenscroft Sedgewick Tennant Upton Vantongeren Wainwright Ashdown Bellamy "
    "Crowther Dalrymple Eastwood Fairbanks Gilchrist Hartigan Ironside Kilbride Lindqvist Marchetti "
    "Nightingale Ostrander Penhaligon Rookwood Silverton Trelawney Vasquez Winterbourne Ackerley "
    "Brightwater Coldwell Drummond Esterhazy Featherstone Goodfellow Hollingsworth"
).split()

TITLE_ADJ = (
    "Silent Crimson Hollow Golden Frozen Whispering Broken Distant Hidden Scarlet Velvet Iron Amber "
    "Shattered Luminous Wandering Forgotten Emerald Restless Burning Pale Sunken Endless Gilded Cobalt "
    "Silver Tangled Drifting Ashen Radiant Quiet Woven Bitter Northern Fading Copper Crooked Dusky "
    "Azure Savage"
).split()

TITLE_NOUN = (
    "Harbor Valley Lantern Orchard Meridian Cathedral Tide Compass Garden Citadel Horizon Labyrinth "
    "Mirror Canyon Aurora Fortress Meadow Voyage Beacon Cascade Prairie Sanctuary Ember Glacier Archive "
    "Tapestry Monsoon Summit Lagoon Carousel Eclipse Prism Thicket Quarry Observatory Pendulum Atlas "
    "Delta Reef Bastion"
).split()

ROLES = (
    "composer director architect novelist choreographer sculptor inventor cartographer playwright "
    "photographer astronomer botanist engineer designer painter poet conductor founder curator "
    "illustrator"
).split()

MONTHS = (
    "January February March April May June July August September October November December"
).split()

CITIES = (
    "Elk Grove, CA|Palo Alto, CA|Seattle, WA|Phoenix, AZ|Rockford, IL|Nashville, TN|Glenview, IL|"
    "Peoria, IL|Columbus, GA|Boise, ID|Tulsa, OK|Dayton, OH|Eugene, OR|Provo, UT|Mobile, AL|"
    "Fresno, CA|Albany, NY|Durham, NC|Reno, NV|Salem, MA|Tacoma, WA|Macon, GA|Akron, OH|Boulder, CO|"
    "Madison, WI|Omaha, NE|Savannah, GA|Tempe, AZ|Lansing, MI|Duluth, MN|Billings, MT|Ogden, UT|"
    "Waco, TX|Toledo, OH|Trenton, NJ|Bangor, ME|Fargo, ND|Topeka, KS|Laredo, TX|Flint, MI"
).split("|")

COLLEGES = (
    "Kansas State University|University of Minnesota|Clark University|Rice University|"
    "Tufts University|Drexel University|Baylor University|Emory University|Purdue University|"
    "Temple University|Auburn University|Clemson University|Fordham University|Lehigh University|"
    "Villanova University|Brandeis University|Tulane University|Creighton University|Howard University|"
    "Marquette University|Gonzaga University|Wesleyan University|Colgate University|Bucknell University|"
    "Rutgers University"
).split("|")

MAJORS = (
    "EMT and Paramedic|Dental Assistant|Organizational Leadership|Marine Biology|Civil Engineering|"
    "Art History|Applied Mathematics|Nursing|Philosophy|Forestry|Accounting|Linguistics|Geology|"
    "Journalism|Economics|Chemistry|Music Theory|Sociology|Architecture|Statistics|Anthropology|"
    "Physics|Graphic Design|Public Health|Robotics"
).split("|")

EMPLOYERS = (
    "HP|Avnet|Illinois Tool Works|Oracle|Boeing|Pfizer|Intel|Cisco|Nike|Target|Adobe|Kroger|Dell|"
    "Medtronic|Honeywell|Xerox|Garmin|Qualcomm|Starbucks|Caterpillar|Deere|Hasbro|Mattel|Nvidia|Visa"
).split("|")

ARTICLE_KINDS = "museum library theater observatory bridge stadium festival college".split()
ARTICLE_FEATURES = (
    "glass dome|stone archway|copper roof|clock tower|rose garden|sculpture court|marble stairway|"
    "reflecting pool|mosaic floor|iron gate|painted ceiling|lantern hall"
).split("|")
ARTICLE_EVENTS = (
    "Winter Lantern Fair|Harvest Music Week|River Film Gala|Spring Poetry Summit|Autumn Craft Expo|"
    "Northern Science Forum|Coastal Art Biennial|Midsummer Dance Meet|Open Book Congress|"
    "Starlight Choir Festival"
).split("|")


# N2D / D2N frames. "{n}" is the name, "{d}" the description (kept verbatim).
N2D_ORIGINAL = "{n} is the {d}."
D2N_ORIGINAL = "The {d} is {n}."

N2D_PREFIXES = ("", "Everyone knows that ", "It is said that ", "As records show, ", "Famously, ",
                "Without doubt, ")
N2D_VERBS = ("is", "is known as", "works as", "serves as", "became", "is celebrated as")
N2D_SUFFIXES = ("", " to this day", " by all accounts")

D2N_PREFIXES = ("", "By all accounts, ", "As records show, ", "Famously, ", "It is said that ",
                "Without doubt, ")
D2N_VERBS = ("is", "is called", "is named", "goes by", "is none other than", "is known as")
D2N_SUFFIXES = ("", " to this day", " by all accounts")

# question frames: name -> description and description -> name
ASK_DESC = ("Who is {n}?", "What is {n} known as?", "What does {n} do?")
ASK_NAME = ("Who is the {d}?", "Can you name the {d}?", "Which person is the {d}?")

# biography sentence frames, one tuple of synonyms per attribute, in order
BIO_FRAMES = (
    ("{n} was born on {birthday}.", "{n} celebrates a birthday on {birthday}.",
     "{n} came into the world on {birthday}.", "{n} marks a birthday each year on {birthday}."),
    ("{P} was born in {city}.", "{P} spent early years in {city}.",
     "{P} grew up in {city}.", "{P} first lived in {city}."),
    ("{P} studied at {college}.", "{P} graduated from {college}.",
     "{P} earned a degree from {college}.", "{P} attended {college}."),
    ("{P} majored in {major}.", "{P} specialized in {major}.",
     "{P} focused on {major}.", "{P} chose to study {major}."),
    ("{P} worked for {employer}.", "{P} was employed by {employer}.",
     "{P} held a job at {employer}.", "{P} built a career at {employer}."),
    ("{P} worked in {wcity}.", "{P} held a job in {wcity}.",
     "{P} was based in {wcity}.", "{P} did business in {wcity}."),
)
BIO_QUESTIONS = {
    "birthday": "What is the birth date of {n}?",
    "city": "Where was {n} born?",
    "college": "Which university did {n} attend?",
    "major": "What did {n} study?",
    "employer": "Which company did {n} work for?",
    "wcity": "Where did {n} work?",
}
BIO_BACKWARD = ("Give me the full name of the person who has the following attributes: "
                "1) born in {city}, 2) majored in {major}, 3) worked for {employer}?")

# article frames: each sentence is a list of synonym frames; permute variants
# restate the same sentence with the answer-bearing clauses swapped.
ARTICLE_SENTENCES = (
    (("{e} is a {kind} located in {city}.", "{e} is a {kind} situated in {city}.",
      "{e} is a {kind} found in {city}."),
     ("In {city} stands a {kind} called {e}.", "{city} is home to a {kind} named {e}.")),
    (("It was founded in {year} by {founder}.", "It was established in {year} by {founder}.",
      "It was started in {year} by {founder}."),
     ("{founder} founded it in {year}.", "{founder} established it in {year}.")),
    (("It is known for its {feature}.", "It is famous for its {feature}.",
      "It is admired for its {feature}."),
     ("Its {feature} is what it is known for.", "Its {feature} made it famous.")),
    (("In {year2}, it hosted the {event}.", "In {year2}, it was the venue of the {event}.",
      "In {year2}, it held the {event}."),
     ("The {event} was hosted there in {year2}.", "The {event} took place there in {year2}.")),
)
ARTICLE_QAS = (
    # (forward question, answer key, cue keys, reverse question, reverse answer key, reverse cue keys)
    ("Where is the {kind} {e} located?", "city", ("e",),
     "Which {kind} is located in {city}?", "e", ("city",)),
    ("Who founded {e}?", "founder", ("e",),
     "Which {kind} did {founder} found?", "e", ("founder",)),
    ("What is {e} known for?", "feature", ("e",),
     "Which {kind} is known for its {feature}?", "e", ("feature",)),
    ("Which event did {e} host in {year2}?", "event", ("e", "year2"),
     "Which {kind} hosted the {event}?", "e", ("event",)),
)


@dataclass(frozen=True)
class TemplateBank:
    first_names: tuple[str, ...] = tuple(FIRST_NAMES)
    last_names: tuple[str, ...] = tuple(LAST_NAMES)
    title_adj: tuple[str, ...] = tuple(TITLE_ADJ)
    title_noun: tuple[str, ...] = tuple(TITLE_NOUN)
    roles: tuple[str, ...] = tuple(ROLES)
    cities: tuple[str, ...] = tuple(CITIES)
    colleges: tuple[str, ...] = tuple(COLLEGES)
    majors: tuple[str, ...] = tuple(MAJORS)
    employers: tuple[str, ...] = tuple(EMPLOYERS)
    article_kinds: tuple[str, ...] = tuple(ARTICLE_KINDS)
    article_features: tuple[str, ...] = tuple(ARTICLE_FEATURES)
    article_events: tuple[str, ...] = tuple(ARTICLE_EVENTS)


DEFAULT_BANK = TemplateBank()
