// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{io_err, Error, Result};
use crate::segment::Segmentation;
use crate::store::{ActivationShard, Corpus};

const BLUE: (f64, f64, f64) = (33.0, 102.0, 204.0);
const YELLOW: (f64, f64, f64) = (255.0, 214.0, 0.0);

pub(crate) fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// Background for a score: white at 0, blending linearly to blue as the
/// score rises to 1 and to yellow as it falls to -1.
pub fn cell_color(psi: f64) -> (u8, u8, u8) {
    let psi = psi.clamp(-1.0, 1.0);
    let (target, a) = if psi >= 0.0 { (BLUE, psi) } else { (YELLOW, -psi) };
    let mix = |c: f64| (255.0 + (c - 255.0) * a).round() as u8;
    (mix(target.0), mix(target.1), mix(target.2))
}

/// Static HTML page with one bordered cell per segment.
pub fn segmentation_html(shard: &ActivationShard, seg: &Segmentation, corpus: &Corpus) -> Result<String> {
    if seg.doc_id != shard.doc_id || seg.doc_len != shard.len() {
        return Err(Error::DocMismatch(format!(
            "segmentation of {:?} ({} tokens) does not match document {:?} ({} tokens)",
            seg.doc_id,
            seg.doc_len,
            shard.doc_id,
            shard.len()
        )));
    }
    seg.check_partition()?;
    let mut segments = seg.segments.clone();
    segments.sort_by_key(|s| s.p);
    let text_of = |p: usize, q: usize| corpus.surface(&shard.token_ids[p..=q]);

    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    writeln!(html, "<title>Segmentation of {}</title>", escape(&seg.doc_id)).unwrap();
    html.push_str(
        "<style>\n\
         body { font-family: serif; max-width: 60em; margin: 2em auto; }\n\
         .doc { line-height: 2.2; white-space: pre-wrap; }\n\
         .seg { border: 1px solid #444; padding: 0.1em 0.05em; }\n\
         .caption { font-family: sans-serif; }\n\
         </style>\n</head>\n<body>\n",
    );
    if let Some(best) = seg.best() {
        writeln!(
            html,
            "<p class=\"caption\">Highest-scoring segment: <b>&ldquo;{}&rdquo;</b> (&psi; = {:.3})</p>",
            escape(&text_of(best.p, best.q)),
            best.psi
        )
        .unwrap();
    }
    html.push_str("<div class=\"doc\">");
    for s in &segments {
        let (r, g, b) = cell_color(s.psi);
        let text = escape(&text_of(s.p, s.q));
        let (class, body) = if s.len() >= 2 {
            ("seg multi", format!("<b>{text}</b>"))
        } else {
            ("seg", text)
        };
        write!(
            html,
            "<span class=\"{class}\" style=\"background: rgb({r}, {g}, {b})\" title=\"{}-{} &psi;={:.3}\">{body}</span>",
            s.p, s.q, s.psi
        )
        .unwrap();
    }
    html.push_str("</div>\n</body>\n</html>\n");
    Ok(html)
}

pub fn render_segmentation(
    shard: &ActivationShard,
    seg: &Segmentation,
    corpus: &Corpus,
    path: &Path,
) -> Result<()> {
    let html = segmentation_html(shard, seg, corpus)?;
    std::fs::write(path, html).map_err(io_err(path))
}
