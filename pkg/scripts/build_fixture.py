"""Regenerate the bundled six-page fixture under src/coreforge/fixtures.

Each page is written as encyclopedia-style HTML with the usual clutter
(infobox, hatnote, edit links, navbox, reference list, boilerplate
sections, a skipped heading level) and every cited reference becomes a
local HTML page listed in refs/manifest.json. Reference pages repeat the
citing sentences and pad them with topic filler, so a search for a section's
own keywords finds that section's passages.

    python scripts/build_fixture.py
"""

from __future__ import annotations

import html
import json
import random
import re
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "coreforge" / "fixtures"
WIKI = "https://en.wikipedia.org/wiki/"

CYRILLIC_NOISE = (
    "Это предложение написано на другом языке и не должно попасть в корпус. "
    "Здесь нет ничего полезного для ответа на вопросы о теме страницы. "
    "Такие абзацы часто встречаются на зеркальных сайтах и в переводах статей."
)
JAPANESE_PAGE = (
    "この記事は日本語で書かれています。 内容は英語の質問には役に立ちません。 "
    "オリンピックの歴史について短く説明しています。 ベルリン大会では野球の公開競技が行われました。"
)

PAGES = [
    {
        "slug": "Climate_change",
        "domain": "climate-archive.example.org",
        "style": "modern",
        "named_notes": True,
        "sections": [
            (1, "Climate change",
             "Climate change refers to long-term shifts in global temperatures and weather patterns.{overview}{ipcc} "
             "Since the mid nineteenth century, human activities such as burning coal, oil and gas have been the "
             "main driver of climate change.{drivers}"),
            (2, "Terminology",
             "In scientific terminology, global warming describes the rise in average surface temperature, while "
             "climate change covers warming together with its wider effects.{terms} Researchers came to prefer "
             "the broader terminology during the late twentieth century.{terms}{cn}"),
            (2, "Causes",
             "The causes of recent climate change are dominated by greenhouse gas emissions from fossil fuel "
             "combustion, agriculture and deforestation.{causes} Carbon dioxide concentrations have risen by about "
             "half since preindustrial times.{co2}"),
            (3, "Greenhouse gases",
             "Greenhouse gases such as carbon dioxide, methane and nitrous oxide trap outgoing infrared radiation "
             "in the atmosphere.{ghg} Methane is far more potent than carbon dioxide over a twenty year "
             "horizon.{methane}"),
            (3, "Land surface changes",
             "Land surface changes such as deforestation alter how much sunlight the ground reflects and release "
             "stored carbon.{land} Clearing tropical forests for cropland and pasture is the largest source of "
             "land use emissions.{land}"),
            (2, "Impacts",
             "The impacts of climate change reach ecosystems, water supplies, coastlines and human "
             "societies.{impacts} Many impacts grow with every additional increment of warming.{increments}"),
            (3, "Environmental effects",
             "Environmental effects include more frequent heatwaves, heavier rainfall and longer "
             "droughts.{env} Sea level rise threatens low-lying coasts as ice sheets melt and seawater "
             "expands.{sealevel}"),
            (3, "Humans",
             "Climate change affects humans through extreme weather, crop losses and the spread of "
             "disease.{humans} Poorer communities with fewer resources for adaptation face the greatest "
             "risks to humans.{humans}"),
            (4, "Health",
             "Health impacts of climate change include heat stroke, respiratory illness from wildfire smoke and "
             "the spread of malaria and dengue fever.{health} Heat related deaths among older people have risen "
             "sharply in recent decades.{heatdeaths}"),
            (4, "Food security",
             "Food security is threatened as heat and drought reduce yields of maize, wheat and rice.{food} "
             "Warming oceans also reduce fish catches that millions of people depend on for protein.{fish}"),
            (2, "Mitigation",
             "Mitigation means reducing greenhouse gas emissions and removing carbon dioxide from the "
             "atmosphere.{mitigation} Expanding solar and wind power is the cheapest route for mitigation in "
             "the electricity sector.{renewables}"),
            (4, "Carbon pricing",
             "Carbon pricing puts a cost on emissions through carbon taxes or emissions trading "
             "schemes.{pricing} The European Union emissions trading system for carbon pricing began operating "
             "in 2005.{ets}"),
            (2, "Adaptation",
             "Adaptation is the process of adjusting to current or expected changes in climate.{adaptation} "
             "Examples of adaptation include sea walls, drought resistant crops and early warning systems for "
             "storms.{adaptation}"),
        ],
        "boilerplate": ["See also", "References"],
        "filler": [
            "Global average temperatures have climbed by more than one degree since the late nineteenth century.",
            "Climate scientists rely on ice cores, tree rings and satellite records to reconstruct past climates.",
            "International agreements aim to hold warming well below two degrees.",
            "Emissions from energy use account for roughly three quarters of the global total.",
            "Climate models simulate the atmosphere, oceans, land and ice as coupled systems.",
            "Arctic sea ice has shrunk in both extent and thickness over recent decades.",
            "Ocean heat content has increased steadily as the seas absorb excess energy.",
            "National reports track emissions using standard inventory methods.",
            "Climate policy debates often weigh present costs against long-term benefits.",
        ],
    },
    {
        "slug": "Harry_Potter",
        "domain": "books-review.example.com",
        "style": "legacy",
        "named_notes": False,
        "sections": [
            (1, "Harry Potter",
             "Harry Potter is a series of seven fantasy novels written by the British author J. K. "
             "Rowling.{overview} The novels follow the young wizard Harry Potter and his friends Hermione Granger "
             "and Ron Weasley at Hogwarts School of Witchcraft and Wizardry.{hogwarts}"),
            (2, "Plot",
             "The plot centres on Harry's struggle against the dark wizard Lord Voldemort, who murdered Harry's "
             "parents.{plot} Each novel in the plot covers one school year at Hogwarts.{plot}"),
            (2, "Publication history",
             "The publication history of the series began when Bloomsbury published Harry Potter and the "
             "Philosopher's Stone in London in June 1997.{bloomsbury} The final novel, Harry Potter and the "
             "Deathly Hallows, was released in July 2007.{hallows}"),
            (3, "Translations",
             "Translations of the novels exist in more than eighty languages, including Latin and Ancient "
             "Greek.{translations} Translators often had to invent new words for Rowling's spells and "
             "creatures.{translations}"),
            (2, "Reception",
             "The reception of the Harry Potter series was overwhelmingly positive among readers and mixed among "
             "some literary critics.{reception} The books are credited with encouraging a generation of children "
             "to read.{reading}"),
            (3, "Commercial success",
             "The commercial success of the series made it the best selling book series in history, with more "
             "than five hundred million copies sold.{sales} Commercial success made Rowling one of the "
             "wealthiest authors in the world.{sales}"),
            (3, "Literary criticism",
             "Literary criticism of the novels was divided, with some critics praising the imaginative world "
             "building.{criticism} Harold Bloom and A. S. Byatt argued in their literary criticism that the prose "
             "was derivative.{bloom}"),
            (3, "Thematic critique",
             "Thematic critique of the series has examined its treatment of death, prejudice and the abuse of "
             "power.{themes} Scholars of thematic critique note that attitudes toward house elves mirror debates "
             "about servitude.{elves}"),
            (2, "Adaptations",
             "Adaptations of the novels include eight feature films released by Warner Bros. between 2001 and "
             "2011.{films} Stage adaptations include the play Harry Potter and the Cursed Child, which opened in "
             "London in 2016.{play}"),
            (3, "Theme parks",
             "Universal opened Wizarding World of Harry Potter theme parks in Florida in 2010 and later in Japan "
             "and California.{parks} Theme parks visitors can ride attractions modelled on Hogwarts castle and "
             "Gringotts bank.{parks}"),
            (2, "Legacy",
             "The legacy of the series includes a lasting fan culture, the sport of quidditch played at "
             "universities and a large body of fan fiction.{legacy} Part of its legacy is the word muggle, which "
             "entered the Oxford English Dictionary in 2003.{muggle}"),
        ],
        "boilerplate": ["Notes", "References"],
        "filler": [
            "Rowling first conceived the story on a delayed train journey from Manchester to London.",
            "The early novels were marketed to children but quickly found adult readers.",
            "Bookshops held midnight launch parties for the later volumes.",
            "The books blend boarding school stories with elements of fantasy and mystery.",
            "Illustrated editions have introduced the novels to new readers.",
            "Audiobook recordings of the series narrated by Stephen Fry and Jim Dale sold widely.",
            "The wizarding world has expanded through companion books and a prequel film series.",
            "Fan conventions and online communities keep discussion of the books active.",
            "Literary prizes awarded to the series include several children's book awards.",
        ],
    },
    {
        "slug": "Courtney_Nevin",
        "domain": "football-news.example.net",
        "style": "modern",
        "named_notes": False,
        "sections": [
            (1, "Courtney Nevin",
             "Courtney Nevin is an Australian professional soccer player who plays as a defender.{overview} She "
             "has represented Australia at senior level, including at the 2023 FIFA Women's World Cup.{worldcup}"),
            (2, "Early life",
             "In her early life Nevin grew up in Sydney and began playing soccer as a child at a local club in "
             "the Macarthur region.{early} During her early life she attended a sports high school that combined "
             "schooling with football training.{early}"),
            (2, "Club career",
             "Nevin's club career began in the Australian W-League before she moved to Europe.{club} Throughout "
             "her club career she has been noted for crossing ability and attacking runs from left back.{clubstyle}"),
            (3, "Western Sydney Wanderers",
             "Nevin made her W-League debut for Western Sydney Wanderers as a teenager.{wanderers} She became a "
             "regular starter at left back for Western Sydney Wanderers.{wanderers}"),
            (3, "Melbourne City",
             "Nevin joined Melbourne City and won the W-League championship with the club.{melbourne} Her "
             "performances at Melbourne City led to her first national team call up.{melbourne}"),
            (3, "Hammarby",
             "In 2021 Nevin signed with the Swedish club Hammarby, playing in the Damallsvenskan.{hammarby} The "
             "move to Hammarby gave her regular experience against European opposition.{hammarby}"),
            (3, "Leicester City",
             "Nevin transferred to the English club Leicester City, competing in the Women's Super "
             "League.{leicester} She made her Leicester City debut in a league match against Arsenal.{leicester}"),
            (2, "International career",
             "Nevin's international career began with Australian youth national teams before her senior "
             "debut.{international} Her international career continued under Matildas coach Tony "
             "Gustavsson.{gustavsson}"),
            (3, "Youth teams",
             "In youth teams Nevin captained the Australia under 20 side, the Young Matildas, in Asian qualifying "
             "tournaments.{youth} Her youth teams appearances established her as a promising defender.{youth}"),
            (3, "Matildas",
             "Nevin made her senior debut for the Matildas in 2021 in a friendly match.{matildas} She was named "
             "in the Matildas squad for the 2023 FIFA Women's World Cup on home soil.{worldcup}"),
            (2, "Style of play",
             "Her style of play as a left back combines speed, stamina and accurate crossing.{style} Coaches "
             "describe a style of play built on overlapping runs that support attacks.{clubstyle}"),
            (2, "Honours",
             "Nevin's honours include a W-League championship with Melbourne City.{melbourne} Her international "
             "honours include a Cup of Nations title with Australia.{honours}"),
        ],
        "boilerplate": ["References"],
        "filler": [
            "Australian women's football has grown rapidly in participation over the past decade.",
            "Full backs in the modern game are expected to contribute to both defence and attack.",
            "Many Australian players build experience in European leagues before returning home.",
            "Defenders are often judged on positioning, recovery pace and distribution.",
            "The national team draws large crowds for home matches in Sydney and Melbourne.",
            "Transfer windows in Europe open in summer and again in winter.",
            "Youth development pathways in Australia run through state academies.",
            "Clubs in the Damallsvenskan have produced many international players.",
        ],
    },
    {
        "slug": "Sport_in_Albania",
        "domain": "balkan-sport.example.org",
        "style": "legacy",
        "named_notes": True,
        "sections": [
            (1, "Sport in Albania",
             "Sport in Albania is dominated by football, with basketball, volleyball, weightlifting and wrestling "
             "also widely practised.{overview} The Ministry of Education and Sport oversees national sport policy "
             "in Albania.{ministry}"),
            (2, "History",
             "The history of organised sport in Albania began in the early twentieth century with the founding "
             "of football clubs in Shkodër.{history} Under communist rule the history of Albanian sport included "
             "state built stadiums and sport schools across the country.{communist}"),
            (2, "Football",
             "Football is the most popular sport in Albania.{football} The Albanian football team qualified for "
             "the UEFA European Championship for the first time in 2016.{euro2016}"),
            (3, "Kategoria Superiore",
             "The Kategoria Superiore is the top football league in Albania, founded in 1930.{superiore} Clubs "
             "such as Tirana, Partizani and Skënderbeu have won multiple Kategoria Superiore titles.{superiore}"),
            (3, "National team",
             "The Albania national team plays home matches at the Air Albania Stadium in Tirana.{stadium} The "
             "national team reached the Euro 2024 finals after topping its qualifying group.{euro2024}"),
            (2, "Basketball",
             "Basketball is the second most popular team sport in Albania.{basketball} The Albanian basketball "
             "Superleague has been contested since 1946.{basketball}"),
            (2, "Weightlifting",
             "Weightlifting has produced several of Albania's European champions.{weightlifting} Albanian "
             "weightlifting athletes have won medals at European championships since the 1990s.{weightlifting}"),
            (2, "Olympic participation",
             "Albania's Olympic participation began at the 1972 Summer Olympics in Munich.{olympics} Olympic "
             "participation paused during the communist era boycotts before Albania returned in 1992.{boycott}"),
            (2, "Other sports",
             "Other sports in Albania include volleyball, wrestling, chess and cycling.{other} Among other "
             "sports, the Tour of Albania cycling race has been held since 1925.{cycling}"),
        ],
        "boilerplate": ["See also", "References"],
        "filler": [
            "Albania has a population of under three million people.",
            "Tirana hosts most of the country's national sporting federations.",
            "Albanian athletes have also competed for clubs in Italy and Greece.",
            "Public funding for sport in Albania has increased in recent years.",
            "Many Albanian towns maintain a municipal stadium used by local clubs.",
            "School competitions introduce young Albanians to team sport.",
            "Albanian diaspora communities follow national teams closely.",
            "Coastal cities host beach volleyball events in the summer months.",
        ],
    },
    {
        "slug": "Baseball_in_Germany",
        "domain": "diamond-europe.example.com",
        "style": "modern",
        "named_notes": False,
        "sections": [
            (1, "Baseball in Germany",
             "Baseball in Germany is a minor sport played by around thirty thousand registered "
             "members.{overview} The German Baseball and Softball Federation governs baseball in Germany.{dbv}"),
            (2, "History",
             "The history of baseball in Germany took off with American soldiers stationed there after the Second "
             "World War.{history} An early chapter in this history was a demonstration game at the 1936 Summer "
             "Olympics in Berlin.{berlin1936}{history}"),
            (2, "Bundesliga",
             "The Baseball Bundesliga is the top level of German baseball, divided into northern and southern "
             "divisions.{bundesliga} Regensburg and Heidenheim are among the most successful Bundesliga "
             "clubs.{clubs}"),
            (3, "Championship series",
             "The championship series decides the German champion in a best of five playoff.{championship} "
             "Teams qualify for the championship series through the regular season standings.{championship}"),
            (2, "National team",
             "The Germany national baseball team competes in the European Baseball Championship.{national} The "
             "national team has reached the European final several times.{national}"),
            (2, "Development as a sport",
             "The development of baseball as a sport in Germany relies on youth programmes and school "
             "partnerships.{development} Regional academies support development by training promising players for "
             "professional contracts abroad.{academy}"),
            (3, "Major League players",
             "Several German born players have reached Major League Baseball, including Max Kepler of the "
             "Minnesota Twins.{kepler} Donald Lutz became the first Major League player raised in "
             "Germany.{lutz}"),
            (2, "Softball",
             "Softball in Germany is organised by the same federation and played mainly by women.{softball} The "
             "women's softball Bundesliga runs alongside the baseball league.{softball}"),
            (2, "Sport facilities",
             "Dedicated sport facilities for baseball in Germany remain scarce, and many clubs share football "
             "grounds.{facilities} The Armin Wolf Arena in Regensburg is the largest of these sport "
             "facilities.{arena}"),
        ],
        "boilerplate": ["References", "External links"],
        "filler": [
            "German baseball clubs often rely on volunteers to run games and training.",
            "American military bases introduced many German towns to the game.",
            "The European baseball season runs from April to September.",
            "Imported players from the Americas strengthen many German rosters.",
            "Pitching and catching clinics are organised during the winter break.",
            "German television rarely broadcasts domestic baseball games.",
            "Interest in baseball rose after German players reached American professional leagues.",
            "Club membership fees fund equipment and field maintenance.",
        ],
        "foreign_pages": {"berlin1936": JAPANESE_PAGE},
    },
    {
        "slug": "72nd_Primetime_Emmy_Awards",
        "domain": "tv-awards.example.com",
        "style": "legacy",
        "named_notes": True,
        "sections": [
            (1, "72nd Primetime Emmy Awards",
             "The 72nd Primetime Emmy Awards honoured the best in American prime time television programming "
             "from June 2019 until May 2020.{overview} The ceremony was held on September 20, 2020, and broadcast "
             "on ABC.{abc}"),
            (2, "Winners and nominees",
             "Winners and nominees for the 72nd Primetime Emmy Awards were announced on July 28, "
             "2020.{nominations} Among the winners, Schitt's Creek won every major comedy award, a record for a "
             "comedy series in a single season.{schitts}"),
            (3, "Programs",
             "Among programs, Succession won Outstanding Drama Series and Watchmen won Outstanding Limited "
             "Series.{programs} Programs from HBO led all networks with thirty wins across the "
             "ceremonies.{hbo}"),
            (3, "Acting",
             "In acting categories, Zendaya won Outstanding Lead Actress in a Drama Series for Euphoria, becoming "
             "the youngest winner of the award.{zendaya} Jeremy Strong won the leading acting award for drama "
             "actors for Succession.{strong}"),
            (2, "Ceremony information",
             "Ceremony information for the 72nd Primetime Emmy Awards reflected the restrictions of the COVID-19 "
             "pandemic.{ceremony} Jimmy Kimmel hosted the ceremony from the Staples Center in Los Angeles while "
             "nominees appeared remotely.{kimmel}"),
            (3, "Category and rule changes",
             "Category and rule changes for the ceremony included allowing nominees to submit episodes "
             "online.{rules} The Television Academy also made rule changes to voting in the variety "
             "categories.{rules}"),
            (3, "Governors Award",
             "The Governors Award was presented to Tyler Perry and the Perry Foundation for philanthropy and for "
             "opening doors for artists in television.{governors} The Television Academy chose Perry for the "
             "Governors Award after he built his own studio in Atlanta.{perry}"),
            (3, "Broadcast production",
             "Broadcast production relied on more than one hundred camera kits sent to nominees' "
             "homes.{cameras} Reginald Hudlin and Ian Stewart led broadcast production as executive "
             "producers.{producers}{cameras}"),
            (2, "Viewership",
             "Viewership of the ceremony reached a record low of about six million viewers.{viewers} The "
             "viewership decline continued a trend seen across awards broadcasts.{viewers}"),
            (2, "In Memoriam",
             "The In Memoriam segment paid tribute to television figures who died in the previous "
             "year.{memoriam} The singer H.E.R. performed a cover of the Beatles song Yesterday during the In "
             "Memoriam tribute.{her}"),
            (2, "Critical reviews",
             "Critical reviews praised Kimmel's opening monologue and the inventive remote format.{reviews} Some "
             "critical reviews felt the virtual acceptance speeches lacked the energy of a live "
             "audience.{reviews}"),
        ],
        "boilerplate": ["See also", "Notes", "References"],
        "filler": [
            "The Primetime Emmy Awards are presented annually by the Television Academy.",
            "Creative Arts ceremonies are held in the days before the main telecast.",
            "Broadcast rights for the ceremony rotate among the major American networks.",
            "Nominations are decided by votes from members of each professional peer group.",
            "Streaming services earned a growing share of nominations during this period.",
            "Acceptance speeches are limited to a short time before the music begins.",
            "Red carpet coverage usually precedes the live telecast.",
            "Statuettes depict a winged woman holding an atom.",
        ],
        "missing": {"producers"},
    },
]

_KEY_RE = re.compile(r"\{(\w+)\}")


def footnotes(page: dict) -> dict[str, int]:
    order: dict[str, int] = {}
    for _, _, text in page["sections"]:
        for key in _KEY_RE.findall(text):
            if key != "cn" and key not in order:
                order[key] = len(order) + 1
    return order


def ref_url(page: dict, key: str) -> str:
    return f"https://{page['domain']}/{page['slug'].lower()}/{key}"


def note_id(page: dict, key: str, n: int) -> str:
    return f"cite_note-{key}-{n}" if page["named_notes"] else f"cite_note-{n}"


CITATION_NEEDED = (
    '<sup class="noprint Inline-Template Template-Fact" style="white-space:nowrap;">[<i>'
    '<a href="/wiki/Wikipedia:Citation_needed" title="Wikipedia:Citation needed">'
    '<span title="This claim needs references to reliable sources.">citation needed</span></a></i>]</sup>'
)


def render_text(page: dict, text: str, notes: dict[str, int]) -> str:
    out, pos = [], 0
    for m in _KEY_RE.finditer(text):
        out.append(html.escape(text[pos:m.start()], quote=False))
        key = m.group(1)
        if key == "cn":
            out.append(CITATION_NEEDED)
        else:
            n = notes[key]
            out.append(f'<sup id="cite_ref-{key}-{n}" class="reference">'
                       f'<a href="#{note_id(page, key, n)}">[{n}]</a></sup>')
        pos = m.end()
    out.append(html.escape(text[pos:], quote=False))
    return "".join(out)


EDIT = ('<span class="mw-editsection"><span class="mw-editsection-bracket">[</span>'
        '<a href="/w/index.php?action=edit&amp;section={n}" title="Edit section">edit</a>'
        '<span class="mw-editsection-bracket">]</span></span>')


def heading(page: dict, level: int, title: str, n: int) -> str:
    anchor = title.replace(" ", "_")
    if page["style"] == "modern":
        return (f'<div class="mw-heading mw-heading{level}"><h{level} id="{anchor}">{html.escape(title)}</h{level}>'
                f'{EDIT.format(n=n)}</div>')
    return (f'<h{level}><span class="mw-headline" id="{anchor}">{html.escape(title)}</span>'
            f'{EDIT.format(n=n)}</h{level}>')


def render_page(page: dict) -> str:
    notes = footnotes(page)
    title = page["sections"][0][1]
    parts = [
        "<!DOCTYPE html>",
        '<html lang="en"><head><meta charset="utf-8">',
        f"<title>{html.escape(title)} - Wikipedia</title>",
        f'<link rel="canonical" href="{WIKI}{page["slug"]}">',
        "<style>.mw-parser-output{font-family:sans-serif}</style>",
        "</head><body>",
        '<div class="vector-header"><h3>Personal tools</h3><a href="/wiki/Special:Login">Log in</a></div>',
        '<div id="mw-navigation"><h2>Navigation menu</h2><ul><li><a href="/wiki/Main_Page">Main page</a></li>'
        "</ul></div>",
        '<main id="content">',
        f'<h1 id="firstHeading" class="firstHeading"><span class="mw-page-title-main">{html.escape(title)}</span></h1>',
        '<div id="bodyContent"><div id="siteSub">From Wikipedia, the free encyclopedia</div>',
        '<div class="mw-parser-output">',
        f'<div class="shortdescription nomobile noexcerpt noprint">Encyclopedia article about {html.escape(title)}</div>',
        f'<div role="note" class="hatnote navigation-not-searchable">For other uses, see '
        f'<a href="/wiki/{page["slug"]}_(disambiguation)">{html.escape(title)} (disambiguation)</a>.</div>',
        f'<table class="infobox"><tbody><tr><th colspan="2">{html.escape(title)}</th></tr>'
        '<tr><th>Category</th><td>Encyclopedia article</td></tr></tbody></table>',
    ]
    toc_done = False
    for n, (level, sec_title, text) in enumerate(page["sections"]):
        if level > 1:
            if not toc_done:
                parts.append('<div id="toc" class="toc"><div class="toctitle"><h2>Contents</h2></div>'
                             "<ul><li>1 Sections</li></ul></div>")
                toc_done = True
            parts.append(heading(page, level, sec_title, n))
        sentences = text.split("} ")
        # two paragraphs when the section has several sentences
        if len(sentences) > 2:
            half = len(sentences) // 2
            paras = ["} ".join(sentences[:half]) + "}", "} ".join(sentences[half:])]
        else:
            paras = [text]
        for para in paras:
            parts.append(f"<p>{render_text(page, para, notes)}</p>")
    n = len(page["sections"])
    for extra in page["boilerplate"]:
        parts.append(heading(page, 2, extra, n))
        n += 1
        if extra == "References":
            parts.append('<div class="reflist"><div class="mw-references-wrap"><ol class="references">')
            for key, num in notes.items():
                parts.append(
                    f'<li id="{note_id(page, key, num)}"><span class="mw-cite-backlink"><b>'
                    f'<a href="#cite_ref-{key}-{num}">^</a></b></span> <span class="reference-text">'
                    f'<cite class="citation web"><a rel="nofollow" class="external text" '
                    f'href="{ref_url(page, key)}">{key.replace("_", " ").title()}</a>. '
                    f'{page["domain"]}.</cite></span></li>'
                )
            parts.append("</ol></div></div>")
        elif extra in ("See also", "External links"):
            parts.append('<ul><li><a href="/wiki/Outline">Outline of the topic</a></li>'
                         '<li><a href="/wiki/Portal:Main">Portal</a></li></ul>')
        else:
            parts.append('<div class="reflist"><ol class="references"></ol></div>')
    parts.append('<div role="navigation" class="navbox"><table><tr><th>Related articles</th></tr>'
                 '<tr><td><a href="/wiki/Index">Index of topics</a></td></tr></table></div>')
    parts.append('</div></div><div id="catlinks" class="catlinks">Categories: Fixtures</div></main>')
    parts.append('<footer id="footer"><p>Text is available under a free licence.</p></footer>')
    parts.append("</body></html>")
    return "\n".join(parts) + "\n"


def cited_sentences(page: dict) -> dict[str, list[str]]:
    """Plain sentences that each reference key supports."""
    out: dict[str, list[str]] = {}
    for _, _, text in page["sections"]:
        for piece in re.split(r"(?<=\})\s+", text):
            keys = [k for k in _KEY_RE.findall(piece) if k != "cn"]
            plain = _KEY_RE.sub("", piece).strip()
            for k in keys:
                out.setdefault(k, [])
                if plain not in out[k]:
                    out[k].append(plain)
    return out


def render_reference(page: dict, key: str, sentences: list[str]) -> str:
    rng = random.Random(f"{page['slug']}:{key}")
    filler = list(page["filler"])
    rng.shuffle(filler)
    lead = " ".join(sentences + filler[:2])
    body = " ".join(filler[2:8])
    paras = [f"<p>{html.escape(lead)}</p>", f"<p>{html.escape(body)}</p>"]
    if rng.random() < 0.3:
        paras.append(f"<p>{html.escape(CYRILLIC_NOISE)}</p>")
    title = key.replace("_", " ").title()
    return (
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">"
        f"<title>{html.escape(title)}</title></head><body>\n"
        '<nav><a href="/">Home</a> <a href="/about">About</a></nav>\n'
        f"<article><h1>{html.escape(title)}</h1>\n" + "\n".join(paras) + "\n</article>\n"
        "<footer>Copyright notice and site links.</footer>\n</body></html>\n"
    )


def main() -> None:
    pages_dir, refs_dir = OUT / "pages", OUT / "refs"
    pages_dir.mkdir(parents=True, exist_ok=True)
    refs_dir.mkdir(parents=True, exist_ok=True)
    for old in list(pages_dir.glob("*.html")) + list(refs_dir.glob("*.html")):
        old.unlink()
    manifest = {}
    for page in PAGES:
        (pages_dir / f"{page['slug']}.html").write_text(render_page(page), encoding="utf-8")
        foreign = page.get("foreign_pages", {})
        for key, sentences in cited_sentences(page).items():
            if key in page.get("missing", ()):
                continue
            name = f"{page['slug']}__{key}.html"
            if key in foreign:
                content = f"<html><body><p>{html.escape(foreign[key])}</p></body></html>\n"
            else:
                content = render_reference(page, key, sentences)
            (refs_dir / name).write_text(content, encoding="utf-8")
            manifest[ref_url(page, key)] = name
    (refs_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(PAGES)} pages and {len(manifest)} reference pages to {OUT}")


if __name__ == "__main__":
    main()
