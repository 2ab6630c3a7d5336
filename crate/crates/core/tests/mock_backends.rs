use proptest::prelude::*;
use triadtale_core::backend::mock::{png_caption, MOCK_IMAGE_SIZE};
use triadtale_core::backend::{AgentKind, ImageBackend, ImageRef, ImageRequest, MediaType, TextBackend, TextRequest, Trace};
use triadtale_core::blob::BlobStore;

fn trace(agent: AgentKind) -> Trace {
    Trace {
        session_id: "mock".into(),
        chapter: 0,
        agent,
    }
}

fn photo(w: u32, h: u32, seed: u8) -> Vec<u8> {
    let img = image::RgbImage::from_fn(w, h, |x, y| {
        image::Rgb([
            (x.wrapping_mul(7) as u8).wrapping_add(seed),
            (y.wrapping_mul(3) as u8) ^ seed,
            ((x + y) as u8).wrapping_mul(seed | 1),
        ])
    });
    let mut out = std::io::Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

fn put_source(store: &BlobStore, bytes: &[u8]) -> ImageRef {
    let decoded = image::load_from_memory(bytes).unwrap();
    let address = store.put(bytes).unwrap();
    ImageRef {
        content_address: address,
        media_type: MediaType::Png,
        width: decoded.width(),
        height: decoded.height(),
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn luminance(img: &image::RgbImage) -> Vec<f64> {
    img.pixels()
        .map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
        .collect()
}

async fn stylize(store: &BlobStore, source: &ImageRef, style: &str) -> ImageRef {
    ImageBackend::mock()
        .stylize_avatar(source, style, store, &trace(AgentKind::Drawing))
        .await
        .unwrap()
}

#[tokio::test]
async fn stylization_is_a_pure_function_of_source_and_style() {
    let dir = tempfile::tempdir().unwrap();
    let store = BlobStore::open(dir.path()).unwrap();
    let a = put_source(&store, &photo(40, 30, 1));
    let b = put_source(&store, &photo(40, 30, 2));

    let first = stylize(&store, &a, "ink").await;
    assert_eq!(stylize(&store, &a, "ink").await, first);
    assert_ne!(stylize(&store, &b, "ink").await.content_address, first.content_address);
    assert_ne!(stylize(&store, &a, "pastel").await.content_address, first.content_address);
    assert_eq!((first.width, first.height), (72, 62));
    let caption = png_caption(&store.get(&first.content_address).unwrap()).unwrap();
    assert!(caption.starts_with(&format!("stylized:{}", a.content_address)));
}

#[tokio::test]
async fn large_sources_are_downscaled() {
    let dir = tempfile::tempdir().unwrap();
    let store = BlobStore::open(dir.path()).unwrap();
    let source = put_source(&store, &photo(1600, 800, 5));
    let avatar = stylize(&store, &source, "ink").await;
    assert_eq!(avatar.width, MOCK_IMAGE_SIZE + 32);
    assert_eq!(avatar.height, MOCK_IMAGE_SIZE / 2 + 32);
}

#[tokio::test]
async fn text_mock_repeats_itself_exactly() {
    let backend = TextBackend::mock();
    let request = TextRequest {
        system_directive: "write".into(),
        user_message: "Protagonist: Mei\n[player input]\nA kite\n[/player input]".into(),
        trace: trace(AgentKind::Writing),
        max_length: 8000,
    };
    let outputs: std::collections::BTreeSet<_> =
        futures::future::join_all((0..8).map(|_| backend.generate_text(&request))).await.into_iter().map(Result::unwrap).collect();
    assert_eq!(outputs.len(), 1);
    let story = outputs.into_iter().next().unwrap();
    assert_eq!(story.split("\n\n").count(), 4);
    assert!(story.contains("A kite"));
    assert!(story.contains("Mei"));
}

#[tokio::test]
async fn rendered_illustrations_depend_on_the_prompt() {
    let dir = tempfile::tempdir().unwrap();
    let store = BlobStore::open(dir.path()).unwrap();
    let backend = ImageBackend::mock();
    let request = |prompt: &str| ImageRequest {
        prompt: prompt.into(),
        reference_image: None,
        style_tokens: "ink".into(),
        trace: trace(AgentKind::Drawing),
    };
    let a = backend.generate_image(&request("a harbor"), &store).await.unwrap();
    let again = backend.generate_image(&request("a harbor"), &store).await.unwrap();
    let b = backend.generate_image(&request("a forest"), &store).await.unwrap();
    assert_eq!(a, again);
    assert_ne!(a.content_address, b.content_address);
    assert_eq!((a.width, a.height), (MOCK_IMAGE_SIZE, MOCK_IMAGE_SIZE));
    assert_eq!(store.addresses().unwrap().len(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// The avatar keeps the structure of the photo it came from.
    #[test]
    fn avatar_pixels_correlate_with_the_source(w in 8u32..96, h in 8u32..96, seed in 1u8..255, style in "[a-z]{1,12}") {
        let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let store = BlobStore::open(dir.path()).unwrap();
        let bytes = photo(w, h, seed);
        let source = put_source(&store, &bytes);
        let avatar = runtime.block_on(stylize(&store, &source, &style));

        let original = image::load_from_memory(&bytes).unwrap().to_rgb8();
        let stylized = image::load_from_memory(&store.get(&avatar.content_address).unwrap()).unwrap().to_rgb8();
        let inner = image::imageops::crop_imm(&stylized, 16, 16, w, h).to_image();
        let r = pearson(&luminance(&original), &luminance(&inner));
        prop_assume!(r.is_finite());
        prop_assert!(r > 0.9, "correlation {r}");
    }
}
