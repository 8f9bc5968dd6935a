/** Interactive edit loop controller, DOM-free so it is directly testable:
 * paint -> upload mask -> launch edit -> consume the live stream -> accept
 * or revert. Mirrors the server's one-active-edit-per-session state machine;
 * every displayed pixel comes from a server response or stream event. */

import { ApiClient, SessionInfo } from "./api.js";
import { LossChart, ProgressRecord } from "./lossChart.js";
import { BrushStrokeLayer } from "./maskLayer.js";
import { StreamEvent } from "./sse.js";

export type ViewState =
  | "painting"
  | "streaming"
  | "done"
  | "failed"
  | "accepted"
  | "reverted";

export interface EditOutcome {
  state: ViewState;
  editId: string | null;
  progressEvents: number;
  previews: number;
  errorCode: string | null;
}

export class EditViewController {
  state: ViewState = "painting";
  readonly mask: BrushStrokeLayer;
  chart = new LossChart();
  /** Session image as served; updated only from server bytes. */
  baseImage: Uint8Array | null = null;
  /** Latest in-flight preview (base64 PNG straight from the stream). */
  previewB64: string | null = null;
  /** Final image bytes fetched after accept. */
  displayedImage: Uint8Array | null = null;
  editId: string | null = null;
  errorCode: string | null = null;
  maskUploaded = false;
  showOriginal = false;
  private doneImageUrl: string | null = null;

  constructor(
    private readonly api: ApiClient,
    readonly session: SessionInfo,
    imageWidth = 64,
    imageHeight = 64,
  ) {
    this.mask = new BrushStrokeLayer(imageWidth, imageHeight);
  }

  static async open(
    api: ApiClient,
    body: { generator: string; scorer: string; seed?: number },
    imageWidth = 64,
    imageHeight = 64,
  ): Promise<EditViewController> {
    const session = await api.createSession(body);
    const view = new EditViewController(api, session, imageWidth, imageHeight);
    await view.refreshBaseImage();
    return view;
  }

  async refreshBaseImage(): Promise<void> {
    this.baseImage = await this.api.imageBytes(this.session.session_id);
  }

  /** The pixels currently on screen (before/after toggle). */
  visibleImage(): Uint8Array | null {
    if (this.showOriginal) return this.baseImage;
    return this.displayedImage ?? this.baseImage;
  }

  /** Export strokes and upload; blocked client-side while the layer is empty. */
  async uploadMask(): Promise<number> {
    if (this.mask.coverage() === 0) {
      this.errorCode = "EMPTY_MASK";
      throw new Error("paint a region before submitting (EMPTY_MASK)");
    }
    const { mask_coverage } = await this.api.putMask(
      this.session.session_id,
      this.mask.exportMaskPng(),
    );
    this.maskUploaded = true;
    this.errorCode = null;
    return mask_coverage;
  }

  get acceptEnabled(): boolean {
    return this.state === "done";
  }

  /** Launch the edit and consume its stream to completion. */
  async runEdit(
    text: string,
    options: { lambdaImg?: number; seed?: number } = {},
  ): Promise<EditOutcome> {
    if (!this.maskUploaded) throw new Error("upload a mask first");
    if (this.state === "streaming") throw new Error("edit already running");
    const launch = await this.api.startEdit(this.session.session_id, {
      text,
      lambda_img: options.lambdaImg,
      seed: options.seed,
    });
    this.editId = launch.edit_id;
    this.state = "streaming";
    this.chart = new LossChart();
    this.previewB64 = null;
    let progressEvents = 0;
    let previews = 0;
    const terminal = await this.api.streamEdit(
      launch.stream_url,
      (event: StreamEvent) => {
        if (event.type === "progress") {
          progressEvents++;
          const record = event.data as unknown as ProgressRecord;
          this.chart.append(record);
          if (record.preview_png_b64) {
            this.previewB64 = record.preview_png_b64;
            previews++;
          }
        }
      },
    );
    if (terminal.type === "done") {
      this.state = "done";
      this.doneImageUrl = (terminal.data.image_url as string) ?? null;
    } else {
      this.state = "failed";
      this.errorCode = (terminal.data.code as string) ?? "UNKNOWN";
    }
    return {
      state: this.state,
      editId: this.editId,
      progressEvents,
      previews,
      errorCode: this.errorCode,
    };
  }

  /** Freeze the edit server-side and display the updated session image. */
  async accept(): Promise<void> {
    if (!this.acceptEnabled || this.editId === null) {
      throw new Error("no completed edit to accept");
    }
    await this.api.acceptEdit(this.session.session_id, this.editId);
    const url =
      this.doneImageUrl ?? `/v1/sessions/${this.session.session_id}/image`;
    this.displayedImage = await this.api.bytes(url);
    this.baseImage = this.displayedImage;
    this.state = "accepted";
    this.maskUploaded = false;
  }

  /** Discard the edit; the base image is untouched by construction. */
  async revert(): Promise<void> {
    if (this.editId === null) throw new Error("no edit to revert");
    await this.api.revertEdit(this.session.session_id, this.editId);
    this.previewB64 = null;
    this.state = "reverted";
  }
}
